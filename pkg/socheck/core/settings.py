"""
Check Configuration - Numeric knobs of the verifier and their JSON storage.

Provides:
- CheckConfig dataclass holding every tolerance, sampling and LP setting
- ConfigManager loading config/check_defaults.json (or a user file)
- Temp-file + rename writes
- Unreadable files moved aside and replaced with defaults

Precedence: built-in defaults < config file < CLI flags (with_overrides).
"""

import json
import logging
import shutil
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from pathlib import Path
from threading import Lock
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)


class CertificateMode(Enum):
    """Second-order row construction of the certificate LP."""
    THEOREM = "theorem"
    COROLLARY = "corollary"


class OracleChoice(Enum):
    """Source of the support intervals S_j."""
    AUTO = "auto"
    SEPARABLE = "separable"
    SAMPLING = "sampling"


@dataclass(frozen=True)
class CheckConfig:
    """
    Configuration for a verification run.

    Attributes:
        samples: Ball samples per radius for the second-order subdifferential estimate
        radii: Decreasing sampling radii
        seed: PRNG seed (all sampling is deterministic under it)
        theta_kink: Relative kink tolerance for Hessian evaluation
        eta_sampled / eta_oracle: LP slack with sampled / exact support intervals
        eta: Explicit LP slack overriding both defaults
        eps_max, eps_min, eps_count: Geometric schedule for weak directional derivatives
        tau_cluster_abs, tau_cluster_rel: Cluster merging tolerance
        tau_crit: Relative tolerance for cone and criticality tests
        tau_feas: Feasibility tolerance for the candidate point
        tau_tangent: Tolerance of the tangent-variation lemma test
        tau_probe: Threshold for the distance quotient of the tangent probe
        tau_bound: Relative slack on ||v|| <= l·||d|| for sampled subdifferential elements
        residual_tol: Tolerance used when re-verifying certificates
        continuity_samples: Base samples of the gradient Lipschitz probe (0 disables it)
        mode: THEOREM or COROLLARY second-order rows
        rays: Enumerate extreme rays of the critical cone
        random_dirs: Number of random unit directions to try
        oracle: Support interval source
        ray_cap_dim: Largest dimension for extreme-ray enumeration
        workers: Threads used to dispatch direction LPs (1 = sequential)
        max_pivots: Simplex pivot cap
    """
    samples: int = 200
    radii: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    seed: int = 0
    theta_kink: float = 1e-8
    eta_sampled: float = 1e-6
    eta_oracle: float = 1e-9
    eta: Optional[float] = None
    eps_max: float = 1e-1
    eps_min: float = 1e-4
    eps_count: int = 13
    tau_cluster_abs: float = 1e-3
    tau_cluster_rel: float = 1e-3
    tau_crit: float = 1e-7
    tau_feas: float = 1e-8
    tau_tangent: float = 1e-3
    tau_probe: float = 1e-2
    tau_bound: float = 0.5
    residual_tol: float = 1e-7
    continuity_samples: int = 16
    mode: CertificateMode = CertificateMode.THEOREM
    rays: bool = True
    random_dirs: int = 0
    oracle: OracleChoice = OracleChoice.AUTO
    ray_cap_dim: int = 6
    workers: int = 1
    max_pivots: int = 5000

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if not isinstance(self.mode, CertificateMode):
            object.__setattr__(self, "mode", CertificateMode(str(self.mode).lower()))
        if not isinstance(self.oracle, OracleChoice):
            object.__setattr__(self, "oracle", OracleChoice(str(self.oracle).lower()))
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if not self.radii or any(r <= 0 for r in self.radii):
            raise ValueError(f"radii must be positive, got {self.radii}")
        if any(a <= b for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError(f"radii must be strictly decreasing, got {self.radii}")
        if not 0 < self.eps_min < self.eps_max or self.eps_count < 2:
            raise ValueError("eps schedule needs 0 < eps_min < eps_max and eps_count >= 2")
        if self.continuity_samples < 0 or self.tau_bound < 0:
            raise ValueError("continuity_samples and tau_bound must be nonnegative")

    @property
    def eps_sequence(self) -> np.ndarray:
        return np.geomspace(self.eps_max, self.eps_min, self.eps_count)

    def lp_slack(self, exact_intervals: bool) -> float:
        """Slack eta_lp for the second-order rows."""
        if self.eta is not None:
            return self.eta
        return self.eta_oracle if exact_intervals else self.eta_sampled

    def cluster_tolerance(self, scale: float) -> float:
        return self.tau_cluster_abs + self.tau_cluster_rel * abs(scale)

    def with_overrides(self, **overrides) -> "CheckConfig":
        """Copy with every non-None override applied."""
        applied = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **applied) if applied else self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["radii"] = list(self.radii)
        data["mode"] = self.mode.value
        data["oracle"] = self.oracle.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "CheckConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            log.warning(f"Ignoring unknown config keys: {', '.join(unknown)}")
        return cls(**{k: v for k, v in data.items() if k in known})


class ConfigManager:
    """
    Loads and saves a CheckConfig JSON file.

    Features:
    - Missing file: built-in defaults
    - Corrupted file: backed up to *.json.corrupted, defaults restored and saved
    - Atomic writes (temp + rename)
    """

    def __init__(self, config_path: Path):
        self._config_path = Path(config_path)
        self._lock = Lock()
        self._config = CheckConfig()
        self._load_config()

    @property
    def config(self) -> CheckConfig:
        return self._config

    @property
    def path(self) -> Path:
        return self._config_path

    def _load_config(self) -> None:
        if not self._config_path.exists():
            log.info(f"No check config at {self._config_path}; built-in tolerances apply")
            return
        try:
            data = json.loads(self._config_path.read_text(encoding="utf-8"))
            if not isinstance(data, dict):
                raise ValueError("config root must be a JSON object")
            self._config = CheckConfig.from_dict(data)
        except json.JSONDecodeError as e:
            self._recover(f"unparseable JSON ({e.msg}, line {e.lineno})")
            return
        except (TypeError, ValueError) as e:
            self._recover(f"rejected values ({e})")
            return
        log.debug(f"check config {self._config_path}: mode={self._config.mode.value}, samples={self._config.samples}")

    def _recover(self, reason: str) -> None:
        """Move the bad file aside as *.json.corrupted and rewrite defaults."""
        log.error(f"check config {self._config_path}: {reason}; falling back to defaults")
        self._config = CheckConfig()
        try:
            backup = self._config_path.with_suffix(".json.corrupted")
            shutil.copy2(self._config_path, backup)
            log.warning(f"previous check config kept at {backup}")
            self.save()
        except OSError as e:
            log.error(f"could not rewrite {self._config_path}: {e}", exc_info=True)

    def update(self, config: CheckConfig) -> None:
        with self._lock:
            self._config = config

    def save(self) -> None:
        """Write the current config to a sibling temp file, then rename over the target."""
        with self._lock:
            self._config_path.parent.mkdir(parents=True, exist_ok=True)
            staged = self._config_path.with_suffix(".tmp")
            staged.write_text(json.dumps(self._config.to_dict(), indent=2) + "\n", encoding="utf-8")
            staged.replace(self._config_path)
        log.debug(f"check config written to {self._config_path}")
