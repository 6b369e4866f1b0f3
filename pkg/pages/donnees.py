import os

import streamlit as st
import plotly.express as px

from errors import InputError

def show_donnees_page(store_histogram):
    st.title("Magasin de données")

    store_dir = st.text_input("Répertoire du magasin (sortie de `creditarf ingest`)", value="store")
    if not store_dir or not os.path.isdir(store_dir):
        st.info("Indiquez un répertoire de magasin existant.")
        return

    try:
        histogram = store_histogram(store_dir)
    except InputError as e:
        st.error(f"❌ {e}")
        return

    total = int(histogram["Échantillons"].sum())
    with_arf = int(histogram["Avec ARF"].sum())
    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric("Échantillons", total)
    with col2:
        st.metric("Entraînement / Test", f"{int(histogram['Entraînement'].sum())} / {int(histogram['Test'].sum())}")
    with col3:
        st.metric("Couverture ARF", f"{with_arf / total:.0%}" if total else "0%")

    melted = histogram.melt(id_vars="Classe", value_vars=["Entraînement", "Test"],
                            var_name="Partition", value_name="Nombre")
    fig = px.bar(melted, x="Classe", y="Nombre", color="Partition", title="Répartition des classes de notation")
    st.plotly_chart(fig, use_container_width=True)
    st.dataframe(histogram, use_container_width=True)
