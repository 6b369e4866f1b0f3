import streamlit as st
import plotly.express as px

def show_rapport_page(get_runs, get_run, per_class_frame):
    st.title("Rapport d'évaluation")

    runs = get_runs()
    if not runs:
        st.info("Aucune exécution évaluée n'a été trouvée. Lancez `creditarf eval` pour produire un report.json.")
        return

    run_name = st.selectbox("Exécution", options=runs, index=0)
    run = get_run(run_name)
    report = run.report

    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Exactitude", f"{report.accuracy:.3f}")
    with col2:
        st.metric("F1 macro", f"{report.macro_f1:.3f}")
    with col3:
        st.metric("F1 pondéré", f"{report.weighted_f1:.3f}")
    with col4:
        st.metric("Échantillons de test", report.n_samples)

    tabs = st.tabs(["Par classe", "Matrice de confusion", "Apprentissage", "Modèle"])

    with tabs[0]:
        st.subheader("Précision, rappel et F1 par classe")
        per_class = per_class_frame(report)
        st.dataframe(per_class.style.format({"Précision": "{:.3f}", "Rappel": "{:.3f}", "F1": "{:.3f}"}),
                     use_container_width=True)
        melted = per_class.melt(id_vars="Classe", value_vars=["Précision", "Rappel", "F1"],
                                var_name="Métrique", value_name="Valeur")
        fig = px.bar(melted, x="Classe", y="Valeur", color="Métrique", barmode="group",
                     title="Métriques par catégorie de notation")
        fig.update_layout(yaxis_range=[0, 1])
        st.plotly_chart(fig, use_container_width=True)

    with tabs[1]:
        st.subheader("Matrice de confusion (lignes = réel, colonnes = prédit)")
        st.dataframe(run.confusion, use_container_width=True)

    with tabs[2]:
        if run.history is None or run.history.empty:
            st.info("Aucun history.csv dans ce répertoire d'exécution.")
        else:
            col1, col2 = st.columns(2)
            with col1:
                losses = run.history.melt(id_vars="epoch", value_vars=["train_loss", "val_loss"],
                                          var_name="Perte", value_name="Valeur")
                fig = px.line(losses, x="epoch", y="Valeur", color="Perte", title="Pertes par époque")
                st.plotly_chart(fig, use_container_width=True)
            with col2:
                fig = px.line(run.history, x="epoch", y="lr", title="Taux d'apprentissage", log_y=True, markers=True)
                st.plotly_chart(fig, use_container_width=True)

    with tabs[3]:
        if run.model is None:
            st.info("Aucun model.json dans ce répertoire d'exécution.")
        else:
            spec = run.model["spec"]
            st.write(f"Encodeur financier : **{spec['fnf']['kind']}**  |  Mode : **{spec['crp']['mode']}**  |  "
                     f"Financier seul : **{spec['crp']['financial_only']}**")
            st.caption(f"Empreinte SHA-256 : {run.model['digest']}")
            st.json(run.model.get("metadata", {}), expanded=False)
