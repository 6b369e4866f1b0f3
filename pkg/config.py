import dataclasses
import json
import logging
import os

from dotenv import load_dotenv

from errors import ConfigError
from numerics.rng import derive_seed

load_dotenv()

LOG_LEVEL = os.environ.get('CREDITARF_LOG_LEVEL', 'INFO')
RUNS_DIR = os.environ.get('CREDITARF_RUNS_DIR', 'runs')
DEFAULT_SEED = int(os.environ.get('CREDITARF_SEED', '42'))

# Décalages splitmix64 : chaque module tire sa graine de la graine maîtresse
SEED_OFFSETS = {
    "split": 1,
    "smote": 2,
    "fnf": 3,
    "arf": 4,
    "crp": 5,
    "train": 6,
    "synth": 7,
    "embed": 8,
    "validation": 9,
}

logger = logging.getLogger(__name__)


def setup_logging(level=None):
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _field_default(field):
    if field.default is not dataclasses.MISSING:
        return field.default
    if field.default_factory is not dataclasses.MISSING:
        return field.default_factory()
    return None


def _matches(value, default):
    """Le type JSON de `value` convient-il au champ dont `default` est la valeur par défaut ?"""
    if default is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, list):
        return isinstance(value, list) and (not default or all(_matches(v, default[0]) for v in value))
    return isinstance(value, type(default))


def section_from_dict(cls, data, section):
    """Construit une dataclass en refusant toute clé inconnue et toute valeur du mauvais type."""
    if data is None:
        return cls(), []
    if not isinstance(data, dict):
        return cls(), [f"{section} : objet JSON attendu"]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    problems = [f"clé inconnue : {section}.{key}" for key in sorted(data) if key not in fields]
    for key in sorted(k for k in data if k in fields):
        default = _field_default(fields[key])
        if not _matches(data[key], default):
            problems.append(f"{section}.{key} : {type(data[key]).__name__} reçu, {type(default).__name__} attendu")
    if problems:
        return cls(), problems
    try:
        return cls(**data), []
    except TypeError as e:
        return cls(), [f"{section} : {e}"]


def _sections():
    from arf import ArfConfig
    from crp import CrpConfig
    from dataset import DatasetConfig
    from fnf import FnfConfig
    from smote import SmoteConfig
    from training import TrainConfig
    return {
        "dataset": DatasetConfig, "smote": SmoteConfig, "fnf": FnfConfig,
        "arf": ArfConfig, "crp": CrpConfig, "train": TrainConfig,
    }


def _valid_seed(seed):
    return isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0


@dataclasses.dataclass
class RunConfig:
    seed: int = DEFAULT_SEED
    dataset: object = None
    smote: object = None
    fnf: object = None
    arf: object = None
    crp: object = None
    train: object = None

    def __post_init__(self):
        for name, cls in _sections().items():
            if getattr(self, name) is None:
                setattr(self, name, cls())
        # fournisseur par hachage : graine tirée de la graine maîtresse sauf valeur explicite
        if self.arf.provider_seed is None and _valid_seed(self.seed):
            self.arf = dataclasses.replace(self.arf, provider_seed=self.seed_for("embed"))

    def seed_for(self, module):
        return derive_seed(self.seed, SEED_OFFSETS[module])

    def validate(self):
        problems = []
        if not _valid_seed(self.seed):
            problems.append(f"seed doit être un entier positif (reçu {self.seed!r})")
        for name in ("dataset", "smote", "fnf", "arf", "crp", "train"):
            problems.extend(f"{name} : {p}" for p in getattr(self, name).validate())
        return problems

    def to_dict(self):
        return dataclasses.asdict(self)


def run_config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("le document de configuration doit être un objet JSON")
    sections = _sections()
    problems = [f"clé inconnue : {key}" for key in sorted(data) if key not in sections and key != "seed"]
    built = {}
    for name, cls in sections.items():
        built[name], section_problems = section_from_dict(cls, data.get(name), name)
        problems.extend(section_problems)
    config = RunConfig(seed=data.get("seed", DEFAULT_SEED), **built)
    if not problems:
        problems = config.validate()
    if problems:
        raise ConfigError(problems)
    return config


def load_run_config(path=None, seed=None):
    """Charge le document JSON (ou les valeurs par défaut) ; `seed` remplace la graine maîtresse."""
    data = {}
    if path:
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"fichier de configuration introuvable : {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"JSON invalide dans {path} : {e}")
    if seed is not None:
        data = {**data, "seed": seed}
    config = run_config_from_dict(data)
    logger.debug(f"Configuration chargée (graine maîtresse {config.seed})")
    return config
