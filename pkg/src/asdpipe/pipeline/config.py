"""Run configuration and the recipe registry."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..backend import BackendConfig
from ..corpus.records import YEARS
from ..exceptions import ConfigError, ValidationError

SPECTRUM_BRANCHES = ("spectrum", "spectrogram_1024")
MULTISPEC_BRANCHES = ("spectrum", "spectrogram_256", "spectrogram_512", "spectrogram_1024")

# frontend kind + estimator keyword arguments
RECIPES: dict[str, dict] = {
    "ae": {"kind": "ae", "params": {}},
    "dis_spec_adacos_fixed_wo_mixup": {
        "kind": "dis",
        "params": {"branches": SPECTRUM_BRANCHES, "loss": "adacos", "center_mode": "fixed", "mixup_prob": 0.0},
    },
    "dis_spec_adacos_fixed": {
        "kind": "dis",
        "params": {"branches": SPECTRUM_BRANCHES, "loss": "adacos", "center_mode": "fixed"},
    },
    "dis_spec_scac_fixed": {
        "kind": "dis",
        "params": {"branches": SPECTRUM_BRANCHES, "loss": "scac", "center_mode": "fixed"},
    },
    "dis_spec_scac_trainable": {
        "kind": "dis",
        "params": {"branches": SPECTRUM_BRANCHES, "loss": "scac", "center_mode": "trainable"},
    },
    "dis_spec_subspaceloss": {
        "kind": "dis",
        "params": {"branches": SPECTRUM_BRANCHES, "loss": "scac", "center_mode": "fixed", "use_subspace_loss": True},
    },
    "dis_multispec_scac_trainable": {
        "kind": "dis",
        "params": {"branches": MULTISPEC_BRANCHES, "loss": "scac", "center_mode": "trainable"},
    },
    "raw_spec": {"kind": "raw", "params": {}},
}


def recipe_kind(recipe: str) -> str:
    try:
        return RECIPES[recipe]["kind"]
    except KeyError:
        raise ConfigError(f"unknown recipe {recipe!r}; choose from {sorted(RECIPES)}") from None


def default_backend(recipe: str) -> BackendConfig:
    return BackendConfig(kind="copy") if recipe_kind(recipe) == "ae" else BackendConfig(kind="knn_smote")


@dataclass(frozen=True)
class RunConfig:
    year: int
    recipe: str
    workdir: str = "work"
    manifest: str | None = None
    synth: dict | None = None
    backend: BackendConfig | None = None
    seeds: tuple[int, ...] = (0, 1, 2, 3)
    frontend: dict = field(default_factory=dict)
    label_missing: str = "noattr"
    pauc_p: float = 0.1
    pauc_standardized: bool = True
    two_stage_2020: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.year) not in YEARS:
            raise ConfigError(f"year must be one of {YEARS}")
        kind = recipe_kind(self.recipe)
        if (self.manifest is None) == (self.synth is None):
            raise ConfigError("give exactly one of 'manifest' or 'synth'")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ConfigError("seeds must be a non-empty list of distinct integers")
        backend = self.backend or default_backend(self.recipe)
        if (kind == "ae") != (backend.kind == "copy"):
            raise ConfigError("the ae recipe uses the copy backend and only it")
        object.__setattr__(self, "backend", backend)
        object.__setattr__(self, "year", int(self.year))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not 0 < self.pauc_p <= 1:
            raise ConfigError("pauc_p must lie in (0, 1]")

    @property
    def kind(self) -> str:
        return recipe_kind(self.recipe)

    def frontend_params(self) -> dict:
        params = dict(RECIPES[self.recipe]["params"])
        params.update(self.frontend)
        return params

    @classmethod
    def from_dict(cls, obj: dict, base_dir=None) -> "RunConfig":
        obj = dict(obj)
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for req in ("year", "recipe"):
            if req not in obj:
                raise ConfigError(f"config lacks {req!r}")
        if isinstance(obj.get("backend"), dict):
            try:
                obj["backend"] = BackendConfig(**obj["backend"])
            except TypeError as exc:
                raise ConfigError(f"bad backend config: {exc}") from None
        elif isinstance(obj.get("backend"), str):
            obj["backend"] = BackendConfig(kind=obj["backend"])
        if base_dir is not None:
            for key in ("manifest", "workdir"):
                if obj.get(key) and not Path(obj[key]).is_absolute():
                    obj[key] = str(Path(base_dir) / obj[key])
        if "seeds" in obj:
            obj["seeds"] = tuple(obj["seeds"])
        try:
            return cls(**obj)
        except ValidationError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(obj, base_dir=path.resolve().parent)

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if isinstance(kw.get("backend"), str):
            kw["backend"] = replace(self.backend, kind=kw["backend"])
        if "recipe" in kw and "backend" not in kw and kw["recipe"] != self.recipe:
            kw["backend"] = default_backend(kw["recipe"])
        return replace(self, **kw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["backend"] = self.backend.to_dict()
        out["seeds"] = list(self.seeds)
        return out

    def identity(self) -> dict:
        """Everything that determines results (not where they go or how many trials)."""
        out = self.to_dict()
        for key in ("workdir", "seeds", "n_jobs"):
            out.pop(key)
        if out["manifest"] is not None:
            out["manifest"] = str(Path(out["manifest"]).resolve())
        out["frontend"] = _jsonable(self.frontend_params())
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True, default=list).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj
