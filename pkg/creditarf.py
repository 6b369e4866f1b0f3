"""Interface en ligne de commande : creditarf {ingest|embed|train|eval|compare|synth}."""
import argparse
import logging
import os
import sys

from config import load_run_config, setup_logging
from errors import EXIT_OK, CreditArfError

logger = logging.getLogger("creditarf")

__version__ = "1.0.0"


# ================================
# COMMANDES
# ================================

def cmd_ingest(args, config):
    from dataset import class_histogram, ingest, CLASS_NAMES
    store = ingest(args.csv, args.reports, config.dataset, config.seed_for("split"))
    store.save(args.out)
    histogram = class_histogram(store.samples)
    print(f"{len(store.samples)} échantillons")
    print("  ".join(f"{name}={count}" for name, count in zip(CLASS_NAMES, histogram)))


def cmd_embed(args, config):
    from arf import build_provider, embed_store, write_arfe
    from dataset import DatasetStore
    store = DatasetStore.load(args.store)
    provider = build_provider(config.arf, args.provider)
    entries = embed_store(store, config.arf, config.seed_for("arf"), provider)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    write_arfe(args.out, config.arf.embedding_dim, entries)
    store.save(args.store)
    print(f"Couverture ARF : {store.arf_coverage:.0%}")


def cmd_train(args, config):
    from dataset import DatasetStore
    from metrics import write_history
    from training import run_training
    store = DatasetStore.load(args.store)
    checkpoint, history = run_training(store, config, baseline=args.baseline)
    checkpoint.save(args.out)
    write_history(args.out, history)
    print(f"{checkpoint.metadata['epochs_run']} époques, lr final {checkpoint.metadata['final_lr']:.2e}")


def cmd_eval(args, config):
    from checkpoint import Checkpoint
    from dataset import DatasetStore
    from metrics import write_report
    from training import run_evaluation
    checkpoint = Checkpoint.load(args.ckpt)
    report = run_evaluation(checkpoint, DatasetStore.load(args.store))
    write_report(args.out, report)
    print(f"Exactitude {report.accuracy:.3f}  F1 macro {report.macro_f1:.3f}  ({report.n_samples} échantillons)")


def cmd_compare(args, config):
    from metrics import compare_runs, load_report, write_comparison
    comparison = compare_runs(load_report(args.a), load_report(args.b),
                              baseline_name=os.path.basename(os.path.normpath(args.a)),
                              with_arf_name=os.path.basename(os.path.normpath(args.b)))
    write_comparison(args.out, comparison)
    print(comparison.render_table())


def cmd_synth(args, config):
    from synth import load_synth_spec, write_synthetic
    spec = load_synth_spec(args.spec)
    write_synthetic(spec, config.seed_for("synth"), args.out)


COMMANDS = {
    "ingest": cmd_ingest,
    "embed": cmd_embed,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "synth": cmd_synth,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="creditarf", description="Prédiction de notation de crédit avec rapports annuels")
    parser.add_argument("--version", action="version", version=f"creditarf {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Document JSON de configuration (sections par module)")
    common.add_argument("--seed", type=int, help="Remplace la graine maîtresse de la configuration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="CSV financier + rapports -> magasin de données")
    p.add_argument("--csv", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("embed", parents=[common], help="Calcule les ArfVector et écrit le cache ARFE")
    p.add_argument("--store", required=True)
    p.add_argument("--provider", help="hash | cache:CHEMIN (remplace arf.provider)")
    p.add_argument("--out", required=True, help="Fichier ARFE à écrire")

    p = sub.add_parser("train", parents=[common], help="Entraîne un modèle ; --out est le répertoire d'exécution")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--baseline", action="store_true", help="Régression logistique (aucune couche cachée)")

    p = sub.add_parser("eval", parents=[common], help="Évalue un point de contrôle sur la partition de test")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", parents=[common], help="Écarts entre deux rapports d'évaluation")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", parents=[common], help="Génère un jeu de données synthétique")
    p.add_argument("--spec")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        config = load_run_config(args.config, args.seed)
        COMMANDS[args.command](args, config)
    except CreditArfError as e:
        logger.error(str(e))
        return e.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
