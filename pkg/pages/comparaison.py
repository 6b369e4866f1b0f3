import streamlit as st
import plotly.express as px

from errors import TestSetMismatchError

def show_comparaison_page(get_runs, get_run, compare_runs):
    st.title("Comparaison de deux exécutions")

    runs = get_runs()
    if len(runs) < 2:
        st.info("Il faut au moins deux exécutions évaluées pour comparer.")
        return

    col1, col2 = st.columns(2)
    with col1:
        baseline_name = st.selectbox("Référence", options=runs, index=0)
    with col2:
        with_arf_name = st.selectbox("Avec ARF", options=runs, index=1)

    if baseline_name == with_arf_name:
        st.warning("Choisissez deux exécutions différentes.")
        return

    try:
        comparison = compare_runs(get_run(baseline_name).report, get_run(with_arf_name).report,
                                  baseline_name=baseline_name, with_arf_name=with_arf_name)
    except TestSetMismatchError as e:
        st.error(f"❌ {e}")
        return

    summary = comparison.summary()
    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric("Δ Exactitude", f"{summary['accuracy_delta']:+.3f}")
    with col2:
        st.metric("Δ F1 macro", f"{summary['macro_f1_delta']:+.3f}")
    with col3:
        st.metric("Δ Précision moyenne par classe", f"{summary['mean_class_precision_delta']:+.3f}")

    st.caption(f"Plus forte hausse : {summary['largest_gain']['class']} ({summary['largest_gain']['delta']:+.3f}), "
               f"plus faible : {summary['smallest_gain']['class']} ({summary['smallest_gain']['delta']:+.3f})")

    st.subheader("Tableau des écarts")
    st.code(comparison.render_table(), language=None)

    deltas = comparison.frame.reset_index()
    deltas = deltas[deltas["scope"] != "All"]
    fig = px.bar(deltas, x="scope", y="delta", color="metric", barmode="group",
                 title="Écarts par catégorie (Rec, Acc = précision, F1)")
    st.plotly_chart(fig, use_container_width=True)

    st.download_button(
        "📥 Télécharger les écarts (CSV)",
        comparison.frame.reset_index().to_csv(index=False).encode("utf-8"),
        file_name=f"comparaison_{baseline_name}_{with_arf_name}.csv",
        mime="text/csv",
    )
