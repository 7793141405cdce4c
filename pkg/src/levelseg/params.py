from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class DetectorParams:
    """Tunable thresholds of the detector.

    Distances are in pixels and angles in degrees. ``use_angle_check``
    switches the level-line angle test (and the angle term of the loss)
    off, leaving coordinate-only validation.
    """

    grad_thresh: float = 0.2
    equalize_radius: float = 10.0
    endpoint_thresh: float = 3.0
    inlier_ratio: float = 0.5
    dist_thresh: float = 3.0
    angle_thresh: float = 20.0
    rho: float = 2.0
    min_length: float = 15.0
    init_window: int = 9
    max_consecutive_rejects: int = 3
    init_refine: bool = True
    use_angle_check: bool = True

    def __post_init__(self):
        for name in ("grad_thresh", "equalize_radius", "endpoint_thresh", "inlier_ratio",
                     "dist_thresh", "angle_thresh", "min_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.inlier_ratio > 1:
            raise ValueError("inlier_ratio must lie in (0, 1]")
        if self.angle_thresh >= 90:
            raise ValueError("angle_thresh must be below 90 degrees")
        if self.init_window < 2:
            raise ValueError("init_window must be at least 2")
        if self.max_consecutive_rejects < 1:
            raise ValueError("max_consecutive_rejects must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown detector parameters: {sorted(unknown)}")
        return cls(**data)
