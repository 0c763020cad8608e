"""RF link budget, Rician fading and the three-stage delivery decision.

Received power for one beacon is assembled as

    RSSI = P_tx + G_tx + G_rx - L_cable - PL(d) - L_obstacle + 10*log10(g)

where PL is log-distance path loss anchored at the free-space attenuation
of the reference distance d0,

    PL(d) = 20*log10(4*pi*d0*f/c) + 10*alpha*log10(d / d0),

and g is a unit-mean Rician power gain with K-factor k_db.

Delivery runs in three stages: RSSI against the receiver sensitivity,
SNR against the decodability threshold (noise drawn per reception from a
normal distribution in dBm, no interference term), and finally a packet
error rate draw with BER = Q(sqrt(2*snr_linear)) for QPSK over AWGN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

# nominal propagation speed used throughout (m/s)
C_LIGHT = 3.0e8

# delivery verdict codes
DELIVERED = 0
BELOW_SENSITIVITY = 1
BELOW_SNIR = 2
PER_DROP = 3
VERDICT_NAMES = ("Delivered", "BelowSensitivity", "BelowSnir", "PerDrop")


@dataclass
class ChannelParams:
    """Radio parameters; defaults reproduce the reference urban V2V setup."""

    carrier_freq_hz: float = 5.9e9
    tx_power_dbm: float = 27.0
    antenna_gain_tx_dbi: float = 9.0
    antenna_gain_rx_dbi: float = 9.0
    cable_loss_db: float = 3.0
    path_loss_exponent: float = 2.4
    rician_k_db: float = 8.0
    reference_distance_m: float = 1.0
    noise_mean_dbm: float = -110.0
    noise_std_db: float = 3.0
    sensitivity_dbm: float = -88.0
    snir_threshold_db: float = 10.0

    def validate(self) -> None:
        if self.reference_distance_m <= 0:
            raise ValueError("reference_distance_m must be > 0")
        if self.noise_std_db < 0:
            raise ValueError("noise_std_db must be >= 0")
        if self.carrier_freq_hz <= 0:
            raise ValueError("carrier_freq_hz must be > 0")

    @property
    def budget_dbm(self) -> float:
        """Transmit-side budget before propagation losses."""
        return (
            self.tx_power_dbm
            + self.antenna_gain_tx_dbi
            + self.antenna_gain_rx_dbi
            - self.cable_loss_db
        )


@dataclass
class DeliveryOutcome:
    verdict: str
    rssi: float
    snir: float
    per: float


def fspl_reference_db(params: ChannelParams) -> float:
    """Free-space loss at the reference distance d0."""
    return 20.0 * np.log10(
        4.0 * np.pi * params.reference_distance_m * params.carrier_freq_hz / C_LIGHT
    )


def path_loss_det(d, params: ChannelParams, return_clamped: bool = False):
    """Deterministic log-distance path loss in dB; accepts scalars or arrays.

    Distances below d0 are clamped to d0; set return_clamped to also get
    the clamp mask so callers can flag affected records.
    """
    d = np.asarray(d, dtype=np.float64)
    clamped = d < params.reference_distance_m
    d_eff = np.maximum(d, params.reference_distance_m)
    loss = fspl_reference_db(params) + 10.0 * params.path_loss_exponent * np.log10(
        d_eff / params.reference_distance_m
    )
    if loss.ndim == 0:
        loss = float(loss)
        clamped = bool(clamped)
    if return_clamped:
        return loss, clamped
    return loss


def rician_gain_from_normals(k_db: float, z1, z2):
    """Unit-mean Rician power gain |h|^2 from standard-normal draws.

    h = sqrt(K/(K+1)) + sqrt(1/(2(K+1))) * (z1 + i z2) with K linear.
    """
    k = 10.0 ** (k_db / 10.0)
    los = np.sqrt(k / (k + 1.0))
    sigma = np.sqrt(1.0 / (2.0 * (k + 1.0)))
    re = los + sigma * np.asarray(z1)
    im = sigma * np.asarray(z2)
    return re * re + im * im


def sample_rician_gain(k_db: float, rng: np.random.Generator, size=None):
    """Draw unit-mean Rician power gains; scalar when size is None."""
    z = rng.standard_normal(size=(2,) if size is None else (2,) + tuple(np.atleast_1d(size)))
    gain = rician_gain_from_normals(k_db, z[0], z[1])
    return float(gain) if size is None else gain


def obstacle_loss(p_tx, p_rx, obstacles) -> float:
    """Shadowing loss along the straight TX->RX path, in dB."""
    if obstacles is None or len(obstacles) == 0:
        return 0.0
    from .kernels import geometry

    p = np.asarray(p_tx, dtype=np.float64).reshape(1, 2)
    q = np.asarray(p_rx, dtype=np.float64).reshape(1, 2)
    return float(
        geometry.pair_obstacle_losses(p, q, obstacles.rects, obstacles.wall_db, obstacles.beta)[0]
    )


def compute_rssi(
    p_tx,
    p_rx,
    params: ChannelParams,
    obstacles=None,
    rng: np.random.Generator | None = None,
    fading_gain: float | None = None,
) -> float:
    """Received power in dBm for one beacon between two positions.

    fading_gain pins the Rician draw (1.0 disables fading); otherwise the
    gain is sampled from rng.  Coincident positions fall back to d0.
    """
    p_tx = np.asarray(p_tx, dtype=np.float64)
    p_rx = np.asarray(p_rx, dtype=np.float64)
    d = float(np.hypot(*(p_rx - p_tx)))
    loss = path_loss_det(d, params)
    extra = obstacle_loss(p_tx, p_rx, obstacles)
    if fading_gain is None:
        if rng is None:
            raise ValueError("need rng or an explicit fading_gain")
        fading_gain = sample_rician_gain(params.rician_k_db, rng)
    return params.budget_dbm - loss - extra + 10.0 * np.log10(fading_gain)


def qpsk_bit_error_rate(snir_db):
    """BER for QPSK over AWGN: Q(sqrt(2*snr)) = erfc(sqrt(snr)) / 2."""
    snir_lin = 10.0 ** (np.asarray(snir_db, dtype=np.float64) / 10.0)
    return 0.5 * erfc(np.sqrt(snir_lin))


def packet_error_rate(snir_db, packet_bits: int):
    """PER = 1 - (1 - BER)^bits, computed via expm1 for small BER."""
    ber = qpsk_bit_error_rate(snir_db)
    return -np.expm1(packet_bits * np.log1p(-ber))


def delivery_verdicts(rssi, noise_dbm, u, params: ChannelParams, packet_bits: int):
    """Vectorized three-stage cascade; returns (verdict codes, snir, per).

    Exactly one verdict applies per element: below sensitivity, below the
    SNR threshold, PER drop, or delivered (u >= PER).
    """
    rssi = np.asarray(rssi, dtype=np.float64)
    snir = rssi - np.asarray(noise_dbm, dtype=np.float64)
    per = packet_error_rate(snir, packet_bits)
    verdict = np.full(rssi.shape, DELIVERED, dtype=np.int8)
    verdict[np.asarray(u) < per] = PER_DROP
    verdict[snir < params.snir_threshold_db] = BELOW_SNIR
    verdict[rssi < params.sensitivity_dbm] = BELOW_SENSITIVITY
    return verdict, snir, per


def delivery_decision(
    rssi: float,
    params: ChannelParams,
    packet_bits: int,
    rng: np.random.Generator | None = None,
    noise_dbm: float | None = None,
    u: float | None = None,
) -> DeliveryOutcome:
    """Decide delivery of one packet; noise and the PER draw come from rng
    unless pinned explicitly (both draws happen even when an early stage
    already rejects, keeping streams aligned with the bulk path)."""
    if packet_bits <= 0:
        raise ValueError("packet_bits must be > 0")
    if noise_dbm is None:
        if rng is None:
            raise ValueError("need rng or an explicit noise_dbm")
        noise_dbm = rng.normal(params.noise_mean_dbm, params.noise_std_db)
    if u is None:
        u = rng.uniform() if rng is not None else 0.5
    codes, snir, per = delivery_verdicts(
        np.asarray([rssi]), np.asarray([noise_dbm]), np.asarray([u]), params, packet_bits
    )
    return DeliveryOutcome(
        verdict=VERDICT_NAMES[codes[0]], rssi=float(rssi), snir=float(snir[0]), per=float(per[0])
    )
