"""Run configuration: defaults, file loading and the content fingerprint."""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ParameterError
from .flow import CANONICAL_MAX_SIDE, SiftFlowParams
from .losses import LossWeights
from .metrics import DEFAULT_OCR_COMMAND, AadParams

FLOW_SOURCES = ("gt", "estimate", "import")
METRICS = ("aad", "ld", "ad_approx", "ms_ssim", "ocr")

# Fields that change where or how fast a run happens but never its results.
_NOT_FINGERPRINTED = ("out_dir", "jobs")


@dataclass(frozen=True)
class RobustnessConfig:
    count: int = 100
    sets: tuple = ("Set1", "Set2", "Set3")
    size: tuple = (256, 256)
    page_seed: int = 1
    amplitude_start: float = 0.5
    amplitude_stop: float = 10.0


@dataclass(frozen=True)
class HeatmapConfig:
    alpha: float = 0.6
    colormap: str = "viridis"
    percentile: float = 99.0


@dataclass(frozen=True)
class RunConfig:
    dataset: str = None
    corpus: str = None
    out_dir: str = "warpmetrics-out"
    metrics: tuple = ("aad", "ld", "ad_approx", "ms_ssim", "ocr")
    flow_source: str = "estimate"
    sift: SiftFlowParams = field(default_factory=SiftFlowParams)
    aad: AadParams = field(default_factory=AadParams)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    predictor: dict = field(default_factory=lambda: {"kind": "file", "template": "grids/{id}.aagrid"})
    rounds: int = 1
    margin: float = 0.05
    seed: int = 0
    canonical_max_side: int = CANONICAL_MAX_SIDE
    ocr_command: str = DEFAULT_OCR_COMMAND
    jobs: int = None
    robustness: RobustnessConfig = field(default_factory=RobustnessConfig)
    heatmap: HeatmapConfig = field(default_factory=HeatmapConfig)

    def __post_init__(self):
        if self.flow_source not in FLOW_SOURCES:
            raise ParameterError(f"flow_source must be one of {FLOW_SOURCES}")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ParameterError(f"unknown metrics: {sorted(unknown)}")
        if self.rounds < 0 or self.margin < 0:
            raise ParameterError("rounds and margin must be >= 0")
        if self.jobs is not None and self.jobs < 1:
            raise ParameterError("jobs must be >= 1")

    def to_dict(self):
        d = asdict(self)
        d["metrics"] = list(self.metrics)
        d["robustness"]["sets"] = list(self.robustness.sets)
        d["robustness"]["size"] = list(self.robustness.size)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ParameterError(f"unknown config keys: {sorted(extra)}")
        nested = {"sift": SiftFlowParams, "aad": AadParams, "loss_weights": LossWeights,
                  "robustness": RobustnessConfig, "heatmap": HeatmapConfig}
        for key, typ in nested.items():
            if key in d and isinstance(d[key], dict):
                sub = dict(d[key])
                if key == "robustness":
                    for k in ("sets", "size"):
                        if k in sub:
                            sub[k] = tuple(sub[k])
                try:
                    d[key] = typ(**sub)
                except TypeError as exc:
                    raise ParameterError(f"bad [{key}] section: {exc}") from exc
        if "metrics" in d:
            d["metrics"] = tuple(d["metrics"])
        return cls(**d)

    def updated(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def fingerprint(self):
        return fingerprint(self)


def canonical_json(config):
    """Compact, key-sorted JSON of every result-affecting field.  Runs write
    these exact bytes to ``config.json``; loading that file reproduces the run."""
    d = config.to_dict()
    for k in _NOT_FINGERPRINTED:
        d.pop(k, None)
    return json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)


def fingerprint(config):
    """sha256 of :func:`canonical_json`."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def write_config(path, config):
    Path(path).write_bytes(canonical_json(config).encode("utf-8"))


def load_config(path):
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            data = tomllib.loads(text.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ParameterError(f"{path}: {exc}") from exc
    else:
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise ParameterError(f"{path}: {exc}") from exc
    return RunConfig.from_dict(data)
