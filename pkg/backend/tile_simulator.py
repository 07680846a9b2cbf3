"""
Bandwidth Sentinel - Tile Simulator
Executable oracle for the channel-tiled convolution loop nest

The loop order is output tile outer, input tile inner:

    for each group:
      for co_base in range(0, N, n):          # output tile
        for ci_base in range(0, M, m):        # input tile
          fetch f_in[ci_base:ci_base+m]       # wi*hi per channel, padding synthesized
          p_sum = conv(block, wt[co tile, ci tile])
          f_out[co tile] (+)= p_sum           # psum write, plus a read when passive

Every fetched input activation, partial-sum read and partial-sum write is
counted while the loop runs on real integer tensors, so the same run also
yields the final output map for comparison against a direct convolution.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .analytic_model import (
    BandwidthBreakdown, ControllerMode, GroupTreatment, Partition,
    PartitionRangeError, group_view,
)
from .model_catalog import ConvLayerShape

logger = logging.getLogger(__name__)

DEFAULT_MAX_ELEMENTS = 1_000_000
DEFAULT_VALUE_RANGE = 8


class SimulationSizeError(ValueError):
    """Raised when a layer is too large to enumerate"""


@dataclass
class AccessCounts:
    """Accesses counted while running the tiled loop nest"""
    input_reads: int = 0
    psum_reads: int = 0
    psum_writes: int = 0
    mac_ops: int = 0

    def to_breakdown(self) -> BandwidthBreakdown:
        return BandwidthBreakdown(self.input_reads, self.psum_reads, self.psum_writes)


@dataclass
class TileIteration:
    """One (output tile, input tile) step of the loop nest"""
    group: int
    co_lo: int
    co_hi: int
    ci_lo: int
    ci_hi: int
    first: bool
    last: bool
    fetched: int
    mac_ops: int
    plane: int
    psum: Optional[np.ndarray] = None

    @property
    def psum_elements(self) -> int:
        return (self.co_hi - self.co_lo) * self.plane


def _effective_layer(layer: ConvLayerShape, groups: GroupTreatment) -> ConvLayerShape:
    if groups is GroupTreatment.DENSE and layer.groups != 1:
        return replace(layer, groups=1)
    return layer


def check_size(layer: ConvLayerShape, max_elements: int = DEFAULT_MAX_ELEMENTS):
    """Reject layers whose wo*ho*M*N exceeds the enumeration bound"""
    size = layer.wo * layer.ho * layer.cin * layer.cout
    if size > max_elements:
        raise SimulationSizeError(
            f"{layer.name}: wo*ho*M*N = {size} exceeds the simulation bound {max_elements}"
        )


def check_partition(layer: ConvLayerShape, p: Partition,
                    groups: GroupTreatment = GroupTreatment.GROUPED):
    _, m_total, n_total = group_view(layer, groups)
    if not 1 <= p.m <= m_total:
        raise PartitionRangeError(f"{layer.name}: m={p.m} outside 1..{m_total}")
    if not 1 <= p.n <= n_total:
        raise PartitionRangeError(f"{layer.name}: n={p.n} outside 1..{n_total}")


def make_tensors(layer: ConvLayerShape, seed: int,
                 value_range: int = DEFAULT_VALUE_RANGE) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seeded integer input maps (cin, hi, wi) and weights (cout, cin/groups, k, k)
    drawn uniformly from [-value_range, value_range]
    """
    rng = np.random.default_rng(seed)
    inputs = rng.integers(-value_range, value_range + 1,
                          size=(layer.cin, layer.hi, layer.wi), dtype=np.int64)
    weights = rng.integers(-value_range, value_range + 1,
                           size=(layer.cout, layer.cin_per_group, layer.k, layer.k), dtype=np.int64)
    return inputs, weights


def _convolve_block(padded: np.ndarray, weights: np.ndarray, layer: ConvLayerShape) -> np.ndarray:
    """Convolve a padded (c, H, W) block with (o, c, k, k) weights -> (o, ho, wo)"""
    ho, wo, s = layer.ho, layer.wo, layer.stride
    out = np.zeros((weights.shape[0], ho, wo), dtype=np.int64)
    for ky in range(layer.k):
        for kx in range(layer.k):
            window = padded[:, ky:ky + s * (ho - 1) + 1:s, kx:kx + s * (wo - 1) + 1:s]
            out += np.einsum('oc,chw->ohw', weights[:, :, ky, kx], window)
    return out


def _pad(block: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return block
    return np.pad(block, ((0, 0), (pad, pad), (pad, pad)))


def iterate_tiles(layer: ConvLayerShape, p: Partition,
                  inputs: Optional[np.ndarray] = None,
                  weights: Optional[np.ndarray] = None) -> Iterator[TileIteration]:
    """
    Walk the tiled loop nest of a layer

    When inputs and weights are given each iteration carries its integer
    partial-sum block; otherwise only the tile geometry and counts are produced.
    """
    g_count, m_total, n_total = layer.groups, layer.cin_per_group, layer.cout_per_group
    plane = layer.wo * layer.ho
    numeric = inputs is not None and weights is not None
    k2 = layer.k * layer.k

    for g in range(g_count):
        in_base, out_base = g * m_total, g * n_total
        for co_base in range(0, n_total, p.n):
            co_lo, co_hi = out_base + co_base, out_base + min(co_base + p.n, n_total)
            for ci_base in range(0, m_total, p.m):
                ci_lo, ci_hi = in_base + ci_base, in_base + min(ci_base + p.m, m_total)
                psum = None
                if numeric:
                    block = inputs[ci_lo:ci_hi]
                    fetched = block.size
                    w_block = weights[co_lo:co_hi, ci_base:ci_base + (ci_hi - ci_lo)]
                    psum = _convolve_block(_pad(block, layer.pad), w_block, layer)
                else:
                    fetched = (ci_hi - ci_lo) * layer.hi * layer.wi
                yield TileIteration(
                    group=g, co_lo=co_lo, co_hi=co_hi, ci_lo=ci_lo, ci_hi=ci_hi,
                    first=ci_base == 0,
                    last=ci_base + p.m >= m_total,
                    fetched=fetched,
                    mac_ops=(co_hi - co_lo) * (ci_hi - ci_lo) * plane * k2,
                    plane=plane,
                    psum=psum,
                )


def tiled_convolution(layer: ConvLayerShape, p: Partition, mode: ControllerMode,
                      inputs: Optional[np.ndarray] = None,
                      weights: Optional[np.ndarray] = None,
                      groups: GroupTreatment = GroupTreatment.GROUPED
                      ) -> Tuple[AccessCounts, Optional[np.ndarray]]:
    """
    Run the tiled loop nest and count every access

    Returns:
        (AccessCounts, final output maps (cout, ho, wo) or None when run without tensors)
    """
    layer = _effective_layer(layer, groups)
    check_partition(layer, p)
    counts = AccessCounts()
    numeric = inputs is not None and weights is not None
    f_out = np.zeros((layer.cout, layer.ho, layer.wo), dtype=np.int64) if numeric else None

    for it in iterate_tiles(layer, p, inputs, weights):
        counts.input_reads += it.fetched
        counts.mac_ops += it.mac_ops
        if not it.first and mode is ControllerMode.PASSIVE:
            counts.psum_reads += it.psum_elements
        counts.psum_writes += it.psum_elements
        if not numeric:
            continue
        if it.first:
            f_out[it.co_lo:it.co_hi] = it.psum
        elif mode is ControllerMode.PASSIVE:
            previous = f_out[it.co_lo:it.co_hi].copy()
            f_out[it.co_lo:it.co_hi] = previous + it.psum
        else:
            f_out[it.co_lo:it.co_hi] += it.psum

    return counts, f_out


def direct_convolution(layer: ConvLayerShape, inputs: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Untiled reference convolution, group by group"""
    m_g, n_g = layer.cin_per_group, layer.cout_per_group
    padded = _pad(inputs, layer.pad)
    out = np.zeros((layer.cout, layer.ho, layer.wo), dtype=np.int64)
    for g in range(layer.groups):
        out[g * n_g:(g + 1) * n_g] = _convolve_block(
            padded[g * m_g:(g + 1) * m_g], weights[g * n_g:(g + 1) * n_g], layer
        )
    return out


def simulate_layer(layer: ConvLayerShape, p: Partition,
                   mode: ControllerMode = ControllerMode.PASSIVE,
                   groups: GroupTreatment = GroupTreatment.GROUPED,
                   seed: Optional[int] = None,
                   max_elements: int = DEFAULT_MAX_ELEMENTS) -> AccessCounts:
    """
    Count input reads, partial-sum reads/writes and MACs of one tiled layer

    Args:
        seed: When given the loop runs on seeded integer tensors; counts are identical
              either way
    """
    effective = _effective_layer(layer, groups)
    check_size(effective, max_elements)
    check_partition(effective, p)
    inputs = weights = None
    if seed is not None:
        inputs, weights = make_tensors(effective, seed)
    counts, _ = tiled_convolution(effective, p, mode, inputs, weights)
    return counts


def verify_numeric(layer: ConvLayerShape, p: Partition, seed: int,
                   mode: ControllerMode = ControllerMode.PASSIVE,
                   groups: GroupTreatment = GroupTreatment.GROUPED,
                   value_range: int = DEFAULT_VALUE_RANGE,
                   max_elements: int = DEFAULT_MAX_ELEMENTS) -> bool:
    """Tiled execution reproduces the direct convolution exactly"""
    effective = _effective_layer(layer, groups)
    check_size(effective, max_elements)
    inputs, weights = make_tensors(effective, seed, value_range)
    _, tiled = tiled_convolution(effective, p, mode, inputs, weights)
    matches = bool(np.array_equal(tiled, direct_convolution(effective, inputs, weights)))
    if not matches:
        logger.error(f"{layer.name}: tiled output differs from direct convolution for {p}")
    return matches


class TileSimulator:
    """
    Simulator settings bound from the application config
    """

    def __init__(self, config: Dict):
        section = config.get('simulator', {})
        self.max_elements = int(section.get('max_elements', DEFAULT_MAX_ELEMENTS))
        self.seed = int(section.get('seed', 42))
        self.value_range = int(section.get('value_range', DEFAULT_VALUE_RANGE))

        logger.info(f"Tile simulator initialized - bound: {self.max_elements} elements")

    def simulate(self, layer: ConvLayerShape, p: Partition, mode: ControllerMode,
                 groups: GroupTreatment = GroupTreatment.GROUPED) -> AccessCounts:
        return simulate_layer(layer, p, mode, groups, seed=self.seed, max_elements=self.max_elements)

    def verify(self, layer: ConvLayerShape, p: Partition, mode: ControllerMode,
               groups: GroupTreatment = GroupTreatment.GROUPED) -> bool:
        return verify_numeric(layer, p, self.seed, mode, groups, self.value_range, self.max_elements)


def create_tile_simulator(config: Dict) -> TileSimulator:
    """Factory function to create the tile simulator"""
    return TileSimulator(config)
