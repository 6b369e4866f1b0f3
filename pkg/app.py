import os

import streamlit as st

from config import RUNS_DIR
from metrics import compare_runs
from runs import list_runs, load_run, per_class_frame, store_histogram

from pages.rapport import show_rapport_page
from pages.comparaison import show_comparaison_page
from pages.donnees import show_donnees_page

# ================================
# CACHE
# ================================

@st.cache_data(ttl=60, show_spinner=False)
def get_cached_runs():
    return list_runs(RUNS_DIR)

@st.cache_data(ttl=300, show_spinner=False)
def get_cached_run(name):
    return load_run(os.path.join(RUNS_DIR, name))

@st.cache_data(ttl=300, show_spinner=False)
def get_cached_store_histogram(store_dir):
    return store_histogram(store_dir)

def clear_runs_cache():
    get_cached_runs.clear()
    get_cached_run.clear()
    get_cached_store_histogram.clear()

# ================================
# STYLES CSS
# ================================

def apply_custom_styles():
    st.markdown("""
    <style>
    :root {
        --primary-blue: #1f3a5f;
        --secondary-blue: #34495e;
        --accent-gold: #c9a227;
    }

    h1 {
        color: var(--primary-blue) !important;
        text-align: center !important;
        margin-bottom: 30px !important;
        font-weight: bold !important;
    }

    h2, h3 {
        color: var(--secondary-blue) !important;
    }

    [data-testid="metric-container"] {
        background: linear-gradient(135deg, rgba(201, 162, 39, 0.1) 0%, rgba(31, 58, 95, 0.1) 100%) !important;
        border: 1px solid var(--accent-gold) !important;
        border-radius: 10px !important;
        padding: 15px !important;
    }

    .stRadio > div {
        background: rgba(201, 162, 39, 0.1) !important;
        border-radius: 8px !important;
        padding: 10px !important;
    }

    footer {visibility: hidden;}
    #MainMenu {visibility: hidden;}
    section[data-testid="stSidebar"] nav {display: none;}
    </style>
    """, unsafe_allow_html=True)

# ================================
# NAVIGATION
# ================================

def initialize_session_state():
    if "app_state" not in st.session_state:
        st.session_state.app_state = {"current_page": "Rapport"}

def show_navigation_sidebar():
    st.sidebar.title("🧭 Navigation")
    app_state = st.session_state.app_state

    st.sidebar.markdown(f"""
    <div style='background: rgba(201, 162, 39, 0.1); padding: 15px; border-radius: 10px;
                margin-bottom: 20px; border: 1px solid #c9a227;'>
        <p style='margin: 0; color: #1f3a5f;'><strong>📁 Exécutions :</strong> {RUNS_DIR}</p>
    </div>
    """, unsafe_allow_html=True)

    pages = ["📊 Rapport", "⚖️ Comparaison", "🗂️ Données"]
    current_idx = next((i for i, p in enumerate(pages) if app_state["current_page"] in p), 0)
    page = st.sidebar.radio("📑 Pages", pages, index=current_idx, key="main_nav")

    st.sidebar.markdown("---")
    if st.sidebar.button("🔄 Actualiser", key="refresh_btn"):
        clear_runs_cache()
        st.rerun()

    page_mapping = {"📊 Rapport": "Rapport", "⚖️ Comparaison": "Comparaison", "🗂️ Données": "Données"}
    clean_page = page_mapping.get(page, "Rapport")
    if app_state["current_page"] != clean_page:
        app_state["current_page"] = clean_page
        st.rerun()
    return clean_page

def main():
    st.set_page_config(
        page_title="Notation de crédit et rapports annuels",
        page_icon="📈",
        layout="wide",
        initial_sidebar_state="expanded"
    )
    apply_custom_styles()
    initialize_session_state()

    current_page = show_navigation_sidebar()

    if current_page == "Comparaison":
        show_comparaison_page(get_cached_runs, get_cached_run, compare_runs)
    elif current_page == "Données":
        show_donnees_page(get_cached_store_histogram)
    else:
        show_rapport_page(get_cached_runs, get_cached_run, per_class_frame)

if __name__ == "__main__":
    main()
