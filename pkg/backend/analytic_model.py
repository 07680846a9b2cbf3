"""
Bandwidth Sentinel - Analytic Bandwidth Model
Closed-form interconnect traffic of a channel-tiled convolution layer

With m input channels and n output channels processed per iteration:
- every input map is fetched once per output tile: wi*hi*M*ceil(N/n)
- every output element is written once per input tile: wo*ho*N*ceil(M/m)
- a passive controller also re-reads the stored partial sum on every
  input tile after the first; an active controller accumulates in place

All counts are raw activation counts (integers).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

from .model_catalog import ConvLayerShape, NetworkModel

logger = logging.getLogger(__name__)


class ControllerMode(Enum):
    """Memory controller behaviour for partial-sum updates"""
    PASSIVE = "passive"   # read, add in the compute engine, write back
    ACTIVE = "active"     # read-update-write inside the controller


class GroupTreatment(Enum):
    """How grouped/depthwise convolutions are costed"""
    GROUPED = "grouped"   # independent per-group convolutions, summed
    DENSE = "dense"       # as if the layer were a dense M -> N convolution


class PartitionRangeError(ValueError):
    """Raised when a tile size falls outside the layer's channel range"""


@dataclass(frozen=True)
class Partition:
    """Channel tiling: m input channels and n output channels per iteration"""
    m: int
    n: int


@dataclass(frozen=True)
class BandwidthBreakdown:
    """Interconnect traffic of one layer or network, in activations"""
    input_reads: int = 0
    psum_reads: int = 0
    psum_writes: int = 0

    @property
    def total(self) -> int:
        return self.input_reads + self.psum_reads + self.psum_writes

    def __add__(self, other: 'BandwidthBreakdown') -> 'BandwidthBreakdown':
        return BandwidthBreakdown(
            input_reads=self.input_reads + other.input_reads,
            psum_reads=self.psum_reads + other.psum_reads,
            psum_writes=self.psum_writes + other.psum_writes,
        )


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def group_view(layer: ConvLayerShape,
               groups: GroupTreatment = GroupTreatment.GROUPED) -> Tuple[int, int, int]:
    """
    Channel geometry seen by the tiler

    Returns:
        (group count, input channels per group, output channels per group)
    """
    if groups is GroupTreatment.DENSE or layer.groups == 1:
        return 1, layer.cin, layer.cout
    return layer.groups, layer.cin_per_group, layer.cout_per_group


def input_bandwidth(layer: ConvLayerShape, n: int,
                    groups: GroupTreatment = GroupTreatment.GROUPED) -> int:
    """Input activations fetched when output channels are tiled by n"""
    g, m_total, n_total = group_view(layer, groups)
    if not 1 <= n <= n_total:
        raise PartitionRangeError(f"{layer.name}: n={n} outside 1..{n_total}")
    return g * layer.wi * layer.hi * m_total * _ceil_div(n_total, n)


def output_bandwidth(layer: ConvLayerShape, m: int, mode: ControllerMode,
                     groups: GroupTreatment = GroupTreatment.GROUPED) -> Tuple[int, int]:
    """
    Partial-sum traffic when input channels are tiled by m

    Returns:
        (psum_reads, psum_writes)
    """
    g, m_total, n_total = group_view(layer, groups)
    if not 1 <= m <= m_total:
        raise PartitionRangeError(f"{layer.name}: m={m} outside 1..{m_total}")
    passes = _ceil_div(m_total, m)
    plane = layer.wo * layer.ho * n_total * g
    writes = plane * passes
    reads = plane * (passes - 1) if mode is ControllerMode.PASSIVE else 0
    return reads, writes


def layer_bandwidth(layer: ConvLayerShape, p: Partition,
                    mode: ControllerMode = ControllerMode.PASSIVE,
                    groups: GroupTreatment = GroupTreatment.GROUPED) -> BandwidthBreakdown:
    """Total traffic of one layer under partition p"""
    reads, writes = output_bandwidth(layer, p.m, mode, groups)
    return BandwidthBreakdown(
        input_reads=input_bandwidth(layer, p.n, groups),
        psum_reads=reads,
        psum_writes=writes,
    )


def active_saving(layer: ConvLayerShape, p: Partition,
                  groups: GroupTreatment = GroupTreatment.GROUPED) -> int:
    """Partial-sum re-reads an active controller removes"""
    reads, _ = output_bandwidth(layer, p.m, ControllerMode.PASSIVE, groups)
    return reads


def layer_min_bandwidth(layer: ConvLayerShape) -> int:
    """Read every input once and write every output once"""
    return layer.wi * layer.hi * layer.cin + layer.wo * layer.ho * layer.cout


def min_bandwidth(network: NetworkModel) -> int:
    """Bandwidth floor of a network with unlimited MACs"""
    return sum(layer_min_bandwidth(layer) for layer in network.layers)


def continuous_objective(layer: ConvLayerShape, macs: int, m: float,
                         mode: ControllerMode = ControllerMode.PASSIVE,
                         groups: GroupTreatment = GroupTreatment.GROUPED) -> float:
    """
    Total bandwidth with real-valued m and n eliminated through k*k*m*n = P

    Passive:  wi*hi*M*(N/P)*k^2*m + wo*ho*N*(2*M/m - 1)
    Active:   wi*hi*M*(N/P)*k^2*m + wo*ho*N*(M/m)
    """
    if m <= 0:
        raise PartitionRangeError(f"{layer.name}: m must be positive, got {m}")
    if macs < layer.k * layer.k:
        raise PartitionRangeError(
            f"{layer.name}: P={macs} below one {layer.k}x{layer.k} kernel ({layer.k * layer.k} MACs)")
    g, m_total, n_total = group_view(layer, groups)
    k2 = layer.k * layer.k
    input_term = layer.wi * layer.hi * m_total * (n_total / macs) * k2 * m
    if mode is ControllerMode.PASSIVE:
        output_term = layer.wo * layer.ho * n_total * (2 * m_total / m - 1)
    else:
        output_term = layer.wo * layer.ho * n_total * (m_total / m)
    return g * (input_term + output_term)
