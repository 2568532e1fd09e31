import importlib
from abc import ABC, abstractmethod
from typing import Dict, Optional, Type

import numpy as np

from .energy import DensityKind, DensityValue, mixed_terms, stiffen_terms, symmetric_dirichlet_terms
from .errors import CertificationError
from .quality import gamma_bound_mixed, gamma_bound_sd


class BaseDensity(ABC):
    """A per-element distortion density with a certified gamma bound."""

    name: str = ""

    def __init__(self, theta: float = 0.5):
        if not 0.0 <= theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {theta}")
        self.theta = theta

    @abstractmethod
    def terms(self, J: np.ndarray, epsilon: float = 0.0) -> DensityValue:
        """
        Batched density (regularized when epsilon > 0) and its derivative in J.
        """
        pass

    @abstractmethod
    def gamma_bound(self, t: float, dim: int) -> Optional[float]:
        """
        Bound on gamma for every map with density < 1/t, or None when it cannot be certified.
        """
        pass

    @property
    def conformal(self) -> bool:
        """True when the density only penalizes shape; gamma is then reported as undefined."""
        return False

    def stiffened(self, J: np.ndarray, t: float) -> DensityValue:
        return stiffen_terms(self.terms(J), t)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(theta={self.theta})"


class MixedDensity(BaseDensity):
    name = DensityKind.MIXED.value

    @property
    def conformal(self) -> bool:
        return self.theta == 0.0

    def terms(self, J: np.ndarray, epsilon: float = 0.0) -> DensityValue:
        return mixed_terms(J, self.theta, epsilon)

    def gamma_bound(self, t: float, dim: int) -> Optional[float]:
        try:
            return gamma_bound_mixed(t, self.theta, dim)
        except CertificationError:
            return None


class SymmetricDirichletDensity(BaseDensity):
    name = DensityKind.SYMMETRIC_DIRICHLET.value

    def terms(self, J: np.ndarray, epsilon: float = 0.0) -> DensityValue:
        return symmetric_dirichlet_terms(J, epsilon)

    def gamma_bound(self, t: float, dim: int) -> Optional[float]:
        try:
            return gamma_bound_sd(t, dim)
        except CertificationError:
            return None


class DensityRegistry:
    def __init__(self):
        self._densities: Dict[str, Type[BaseDensity]] = {}
        self.register(MixedDensity.name, MixedDensity)
        self.register(SymmetricDirichletDensity.name, SymmetricDirichletDensity)

    def register(self, name: str, density_cls: Type[BaseDensity]):
        self._densities[name] = density_cls

    def get(self, name: str) -> Optional[Type[BaseDensity]]:
        return self._densities.get(name)

    def names(self):
        return sorted(self._densities)

    def create(self, name: str, theta: float = 0.5) -> BaseDensity:
        density_cls = self.get(name)
        if density_cls is None:
            raise ValueError(f"Unknown density '{name}'; available: {', '.join(self.names())}")
        return density_cls(theta=theta)

    def load_plugin(self, name: str, class_path: str):
        """
        Dynamically loads a density class from a string path like 'package.module.ClassName'
        """
        try:
            module_path, class_name = class_path.rsplit('.', 1)
            module = importlib.import_module(module_path)
            cls = getattr(module, class_name)
        except (ImportError, AttributeError, ValueError) as e:
            raise ImportError(f"Failed to load density '{name}' from {class_path}: {e}")
        if not (isinstance(cls, type) and issubclass(cls, BaseDensity)):
            raise TypeError(f"Class {class_path} must inherit from BaseDensity")
        self.register(name, cls)
