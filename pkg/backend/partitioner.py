"""
Bandwidth Sentinel - Channel Partitioner
Chooses the (m, n) channel tiling of each layer under a MAC budget

Strategies:
- MAX_INPUT:   give the budget to input channels, remaining factor to outputs
- MAX_OUTPUT:  give the budget to output channels, remaining factor to inputs
- EQUAL_MACS:  square split, m = n = floor(sqrt(P / k^2))
- OPTIMAL:     best divisor of M, n filled from the remaining budget
- ROUNDED:     real-valued first-order optimum rounded to the nearest divisor of M
- BRUTE_FORCE: exhaustive argmin over every feasible (m, n), used as oracle

Every returned partition satisfies k*k*m*n <= P.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional

from .analytic_model import (
    BandwidthBreakdown, ControllerMode, GroupTreatment, Partition,
    group_view, layer_bandwidth,
)
from .model_catalog import ConvLayerShape, NetworkModel

logger = logging.getLogger(__name__)


class Strategy(Enum):
    """Partitioning strategies"""
    MAX_INPUT = "max_input"
    MAX_OUTPUT = "max_output"
    EQUAL_MACS = "equal_macs"
    OPTIMAL = "optimal"
    ROUNDED = "rounded"
    BRUTE_FORCE = "brute_force"


# The strategies compared side by side in strategy reports
COMPARED_STRATEGIES = (Strategy.MAX_INPUT, Strategy.MAX_OUTPUT, Strategy.EQUAL_MACS, Strategy.OPTIMAL)
BASELINE_STRATEGIES = (Strategy.MAX_INPUT, Strategy.MAX_OUTPUT, Strategy.EQUAL_MACS)


class InfeasiblePartitionError(ValueError):
    """Raised when the MAC budget cannot hold even a 1x1 channel tile"""

    def __init__(self, message: str, layer_name: Optional[str] = None):
        self.layer_name = layer_name
        super().__init__(message)


@dataclass(frozen=True)
class AcceleratorConfig:
    """MAC budget P and controller setup of the accelerator"""
    macs: int
    mode: ControllerMode = ControllerMode.PASSIVE
    strategy: Strategy = Strategy.OPTIMAL
    reoptimize_active: bool = False
    groups: GroupTreatment = GroupTreatment.GROUPED

    def __post_init__(self):
        if self.macs < 1:
            raise ValueError(f"macs must be >= 1, got {self.macs}")

    @property
    def objective_mode(self) -> ControllerMode:
        """Controller mode the partition search minimises for"""
        if self.mode is ControllerMode.ACTIVE and self.reoptimize_active:
            return ControllerMode.ACTIVE
        return ControllerMode.PASSIVE

    @classmethod
    def from_config(cls, config: Dict, macs: Optional[int] = None) -> 'AcceleratorConfig':
        """Build from the `accelerator` section of the application config"""
        section = config.get('accelerator', {})
        if macs is None:
            macs_setting = section.get('macs', [512])
            macs = macs_setting[0] if isinstance(macs_setting, list) else int(macs_setting)
        return cls(
            macs=int(macs),
            mode=ControllerMode(section.get('controller', 'passive')),
            strategy=Strategy(section.get('strategy', 'optimal')),
            reoptimize_active=bool(section.get('reoptimize_active', False)),
            groups=GroupTreatment(section.get('groups', 'grouped')),
        )


@dataclass(frozen=True)
class LayerResult:
    """Partition chosen for one layer and the traffic it costs"""
    layer: ConvLayerShape
    partition: Partition
    breakdown: BandwidthBreakdown


@dataclass
class NetworkBandwidth:
    """Per-layer results of a network under one accelerator config"""
    network: str
    config: AcceleratorConfig
    layers: List[LayerResult] = field(default_factory=list)

    @property
    def breakdown(self) -> BandwidthBreakdown:
        total = BandwidthBreakdown()
        for result in self.layers:
            total = total + result.breakdown
        return total

    @property
    def total(self) -> int:
        return sum(result.breakdown.total for result in self.layers)


def _cap(x: int, hi: int) -> int:
    return max(1, min(x, hi))


def divisors(x: int) -> List[int]:
    """Ascending divisors of a positive integer"""
    small, large = [], []
    for d in range(1, math.isqrt(x) + 1):
        if x % d == 0:
            small.append(d)
            if d != x // d:
                large.append(x // d)
    return small + large[::-1]


def feasible(layer: ConvLayerShape, macs: int, m: int, n: int,
             groups: GroupTreatment = GroupTreatment.GROUPED) -> bool:
    """k*k*m*n fits in the MAC budget and both tiles lie within the (per-group) channels"""
    _, m_total, n_total = group_view(layer, groups)
    return (layer.k * layer.k * m * n <= macs
            and 1 <= m <= m_total
            and 1 <= n <= n_total)


def enumerate_feasible(layer: ConvLayerShape, macs: int,
                       groups: GroupTreatment = GroupTreatment.GROUPED) -> Iterator[Partition]:
    """Every feasible partition, m-major"""
    _, m_total, n_total = group_view(layer, groups)
    k2 = layer.k * layer.k
    for m in range(1, min(m_total, macs // k2) + 1):
        for n in range(1, min(n_total, macs // (k2 * m)) + 1):
            yield Partition(m, n)


def optimal_real_m(layer: ConvLayerShape, macs: int,
                   mode: ControllerMode = ControllerMode.PASSIVE) -> float:
    """
    Stationary point of the continuous objective

    Passive: sqrt(2*wo*ho*P / (wi*hi*k^2)); the factor 2 drops for an active controller
    """
    factor = 2 if mode is ControllerMode.PASSIVE else 1
    return math.sqrt(factor * layer.wo * layer.ho * macs / (layer.wi * layer.hi * layer.k * layer.k))


def _fill_outputs(layer: ConvLayerShape, macs: int, m: int, n_total: int) -> int:
    return _cap(macs // (layer.k * layer.k * m), n_total)


def _best_of(layer: ConvLayerShape, candidates: List[Partition], macs: int,
             mode: ControllerMode, groups: GroupTreatment) -> Partition:
    best = None
    best_key = None
    for p in candidates:
        if not feasible(layer, macs, p.m, p.n, groups):
            continue
        key = (layer_bandwidth(layer, p, mode, groups).total, p.m, p.n)
        if best_key is None or key < best_key:
            best, best_key = p, key
    if best is None:
        raise InfeasiblePartitionError(f"{layer.name}: no feasible candidate under P={macs}", layer.name)
    return best


def _brute_force(layer: ConvLayerShape, macs: int, mode: ControllerMode,
                 groups: GroupTreatment) -> Partition:
    # For a fixed m the cost depends on n only through ceil(N/n); the smallest
    # n reaching the minimal ceil is the tie-broken argmin for that m.
    _, m_total, n_total = group_view(layer, groups)
    k2 = layer.k * layer.k
    candidates = []
    for m in range(1, min(m_total, macs // k2) + 1):
        n_max = min(n_total, macs // (k2 * m))
        output_passes = -(-n_total // n_max)
        candidates.append(Partition(m, -(-n_total // output_passes)))
    return _best_of(layer, candidates, macs, mode, groups)


def partition(layer: ConvLayerShape, config: AcceleratorConfig) -> Partition:
    """
    Choose the channel tiling of one layer

    Args:
        layer: Layer to tile
        config: MAC budget, strategy and objective

    Returns:
        Feasible Partition; ties go to the smaller m, then the smaller n
    """
    macs = config.macs
    k2 = layer.k * layer.k
    if macs < k2:
        raise InfeasiblePartitionError(
            f"{layer.name}: P={macs} cannot hold one {layer.k}x{layer.k} kernel ({k2} MACs)", layer.name
        )
    _, m_total, n_total = group_view(layer, config.groups)
    mode = config.objective_mode
    strategy = config.strategy

    if strategy is Strategy.MAX_INPUT:
        m = _cap(macs // k2, m_total)
        chosen = Partition(m, _fill_outputs(layer, macs, m, n_total))
    elif strategy is Strategy.MAX_OUTPUT:
        n = _cap(macs // k2, n_total)
        chosen = Partition(_cap(macs // (k2 * n), m_total), n)
    elif strategy is Strategy.EQUAL_MACS:
        side = _cap(math.isqrt(macs // k2), min(m_total, n_total))
        chosen = Partition(min(side, m_total), min(side, n_total))
    elif strategy is Strategy.OPTIMAL:
        candidates = [Partition(d, _fill_outputs(layer, macs, d, n_total)) for d in divisors(m_total)]
        chosen = _best_of(layer, candidates, macs, mode, config.groups)
    elif strategy is Strategy.ROUNDED:
        target = optimal_real_m(layer, macs, mode)
        usable = [d for d in divisors(m_total) if d * k2 <= macs]
        d = min(usable, key=lambda x: (abs(x - target), x))
        chosen = Partition(d, _fill_outputs(layer, macs, d, n_total))
    elif strategy is Strategy.BRUTE_FORCE:
        chosen = _brute_force(layer, macs, mode, config.groups)
    else:
        raise ValueError(f"Unsupported strategy: {strategy}")

    logger.debug(f"{layer.name}: {strategy.value} P={macs} -> m={chosen.m}, n={chosen.n}")
    return chosen


def layer_partitions(network: NetworkModel, config: AcceleratorConfig) -> List[LayerResult]:
    """Partition every layer independently and cost it under the configured controller"""
    results = []
    for layer in network.layers:
        try:
            p = partition(layer, config)
        except InfeasiblePartitionError as e:
            raise InfeasiblePartitionError(
                f"{network.name}: first infeasible layer '{layer.name}' ({e})", layer.name
            )
        results.append(LayerResult(layer, p, layer_bandwidth(layer, p, config.mode, config.groups)))
    return results


def network_bandwidth(network: NetworkModel, config: AcceleratorConfig) -> NetworkBandwidth:
    """
    Bandwidth of a whole network

    Returns:
        NetworkBandwidth holding the per-layer breakdowns and the network total
    """
    result = NetworkBandwidth(network.name, config, layer_partitions(network, config))
    logger.debug(
        f"{network.name}: {config.strategy.value}/{config.mode.value} P={config.macs} "
        f"total={result.total}"
    )
    return result
