"""
Laplace mechanism for releasing feature-importance vectors
Noise scale calibration, inverse-CDF sampling and perturbation
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from loguru import logger

from ..boosting.gbt import GbtConfig, feature_importance, train_gbt
from ..boosting.importance import ImportanceDistribution, normalize
from ..boosting.sensitivity import Sensitivity, local_sensitivity
from ..core.exceptions import PrivacyError

# Named privacy levels: smaller epsilon means more noise
EPSILON_PRESETS = {
    "high": 0.1,
    "moderate": 1.0,
    "low": 10.0,
}

# Largest |U| the sampler lets through, keeping ln(1 - 2|U|) finite
_U_LIMIT = np.nextafter(0.5, 0.0)


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy budget epsilon"""
    epsilon: float

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise PrivacyError(f"Privacy budget must be positive, got {self.epsilon}", "PRIVACY_001")

    @classmethod
    def resolve(cls, value: Union[float, str]) -> "PrivacyBudget":
        """Budget from a number or a preset name ("high", "moderate", "low")"""
        if isinstance(value, str):
            key = value.strip().lower()
            if key in EPSILON_PRESETS:
                return cls(EPSILON_PRESETS[key])
            try:
                return cls(float(key))
            except ValueError:
                raise PrivacyError(f"Unknown privacy preset '{value}'", "PRIVACY_001")
        return cls(float(value))


@dataclass(frozen=True)
class NoiseScale:
    """Laplace scale sigma = delta / epsilon"""
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise PrivacyError(f"Noise scale must be non-negative, got {self.sigma}", "PRIVACY_002")


def noise_scale(delta: Union[Sensitivity, float], eps: Union[PrivacyBudget, float]) -> NoiseScale:
    """
    Calibrate the Laplace scale

    Args:
        delta: Local sensitivity
        eps: Privacy budget

    Returns:
        NoiseScale: sigma = delta / epsilon
    """
    delta_value = delta.delta if isinstance(delta, Sensitivity) else float(delta)
    budget = eps if isinstance(eps, PrivacyBudget) else PrivacyBudget(float(eps))
    if delta_value < 0:
        raise PrivacyError(f"Sensitivity must be non-negative, got {delta_value}", "PRIVACY_002")
    return NoiseScale(delta_value / budget.epsilon)


def laplace_from_uniform(u: Union[float, np.ndarray], sigma: float) -> Union[float, np.ndarray]:
    """
    Inverse-CDF transform of U ~ Uniform(-1/2, 1/2) into Laplace(0, sigma)

    N = -sigma * sign(U) * ln(1 - 2|U|); |U| is capped just below 1/2.
    """
    u = np.clip(u, -_U_LIMIT, _U_LIMIT)
    noise = -sigma * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return float(noise) if np.ndim(noise) == 0 else noise


def sample_laplace(
    sigma: Union[NoiseScale, float],
    rng: np.random.Generator,
    size: Optional[Union[int, Tuple[int, ...]]] = None,
) -> Union[float, np.ndarray]:
    """
    Draw Laplace noise from a seeded generator

    Args:
        sigma: Noise scale
        rng: Seeded numpy generator
        size: Optional output shape (a scalar when omitted)

    Returns:
        One draw or an array of draws
    """
    scale = sigma.sigma if isinstance(sigma, NoiseScale) else float(sigma)
    if not scale >= 0:
        raise PrivacyError(f"Noise scale must be non-negative, got {scale}", "PRIVACY_002")

    # rng.random is [0, 1); shifting gives [-1/2, 1/2) and the clip removes -1/2
    u = rng.random(size) - 0.5
    return laplace_from_uniform(u, scale)


def perturb(
    importance: ImportanceDistribution,
    sigma: Union[NoiseScale, float],
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Add independent Laplace noise to every coordinate

    The result is a raw vector; re-normalization happens in ``normalize``.

    Args:
        importance: Clean distribution
        sigma: Noise scale
        rng: Seeded numpy generator

    Returns:
        np.ndarray: Noisy raw importance
    """
    scale = sigma.sigma if isinstance(sigma, NoiseScale) else float(sigma)
    if scale == 0:
        return importance.values.copy()
    return importance.values + sample_laplace(scale, rng, size=importance.values.shape)


def release_importance(
    importance: ImportanceDistribution,
    sensitivity: Sensitivity,
    budget: PrivacyBudget,
    rng: np.random.Generator,
) -> ImportanceDistribution:
    """
    Client-side release: perturb with calibrated noise and re-normalize

    Only the returned noisy distribution is meant to leave the client.
    """
    scale = noise_scale(sensitivity, budget)
    noisy = normalize(perturb(importance, scale, rng), client_id=importance.client_id, noisy=True)
    logger.debug(f"Client '{importance.client_id}': released importance with sigma={scale.sigma:.6f}")
    return noisy


@dataclass
class ClientRelease:
    """What a client computes before contacting the server; only ``noisy`` is sent"""
    noisy: ImportanceDistribution
    clean: ImportanceDistribution
    sensitivity: Sensitivity
    sigma: float


def client_importance_release(
    client_id: str,
    X: np.ndarray,
    y: np.ndarray,
    gbt_config: GbtConfig,
    budget: PrivacyBudget,
    rng: np.random.Generator,
    sensitivity_subsample: Optional[int] = None,
    workers: int = 1,
) -> ClientRelease:
    """
    Train the local ensemble, measure sensitivity and release noisy importance

    Args:
        client_id: Client identifier
        X: Training features
        y: Training target
        gbt_config: Ensemble hyperparameters
        budget: Privacy budget
        rng: Client-keyed generator (sensitivity subsampling, then noise)
        sensitivity_subsample: Leave-one-out rows to evaluate (None for exact)
        workers: Threads for the leave-one-out retrainings

    Returns:
        ClientRelease: Noisy and clean distributions with the calibration used
    """
    clean = normalize(feature_importance(train_gbt(X, y, gbt_config)), client_id=client_id)
    sensitivity = local_sensitivity(
        X, y, gbt_config, subsample=sensitivity_subsample, rng=rng, client_id=client_id, workers=workers,
    )
    noisy = release_importance(clean, sensitivity, budget, rng)
    return ClientRelease(noisy=noisy, clean=clean, sensitivity=sensitivity,
                         sigma=noise_scale(sensitivity, budget).sigma)
