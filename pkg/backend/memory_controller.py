"""
Bandwidth Sentinel - Active Memory Controller Model
Transaction-level model of a memory controller that can update partial sums in place

The compute engine tags each write with a command carried on a sideband field:
- Normal read / write: plain memory access over the interconnect
- Accumulate: the controller reads the stored value locally, adds the
  transported partial sum and writes the result back
- Activate-accumulate: as accumulate, followed by the activation selected
  in the controller's configuration register (optional right-shift, then
  identity or ReLU)

A passive controller understands only normal reads and writes, so the
compute engine has to fetch every stored partial sum before updating it.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .analytic_model import ControllerMode, GroupTreatment, Partition
from .model_catalog import ConvLayerShape
from .tile_simulator import (
    DEFAULT_MAX_ELEMENTS, check_partition, check_size, iterate_tiles, make_tensors,
)

logger = logging.getLogger(__name__)

VALUE_MIN = int(np.iinfo(np.int64).min)
VALUE_MAX = int(np.iinfo(np.int64).max)


class MemCommand(Enum):
    """Sideband command tags (value is the trace mnemonic)"""
    NORMAL_READ = "R"
    NORMAL_WRITE = "W"
    ACCUMULATE = "ACC"
    ACTIVATE_ACCUMULATE = "ACT"

    @property
    def writes(self) -> bool:
        return self is not MemCommand.NORMAL_READ

    @property
    def read_update_write(self) -> bool:
        return self in (MemCommand.ACCUMULATE, MemCommand.ACTIVATE_ACCUMULATE)


class ActivationFunction(Enum):
    IDENTITY = "identity"
    RELU = "relu"


class TransactionError(ValueError):
    """Raised for transactions the controller cannot execute"""


class TraceError(TransactionError):
    """A transaction failure located in a stream"""

    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"transaction {index}: {message}")


@dataclass(frozen=True)
class MemTransaction:
    """One command issued by the compute engine"""
    command: MemCommand
    address: int
    value: Optional[int] = None

    def __post_init__(self):
        if self.address < 0:
            raise TransactionError(f"negative address {self.address}")
        if self.command.writes and self.value is None:
            raise TransactionError(f"{self.command.value} at {self.address} needs a value")
        if not self.command.writes and self.value is not None:
            raise TransactionError(f"read at {self.address} must not carry a value")
        if self.value is not None and not VALUE_MIN <= self.value <= VALUE_MAX:
            raise TransactionError(f"value {self.value} at {self.address} does not fit a 64-bit memory word")

    def to_line(self) -> str:
        if self.value is None:
            return f"{self.command.value} {self.address}"
        return f"{self.command.value} {self.address} {self.value}"


@dataclass(frozen=True)
class ActivationRegister:
    """Static activation selection: arithmetic right shift, then the function"""
    function: ActivationFunction = ActivationFunction.IDENTITY
    shift: int = 0

    def __post_init__(self):
        if self.shift < 0:
            raise ValueError(f"shift must be >= 0, got {self.shift}")

    @property
    def is_identity(self) -> bool:
        return self.function is ActivationFunction.IDENTITY and self.shift == 0

    def apply(self, value: int) -> int:
        scaled = value >> self.shift
        if self.function is ActivationFunction.RELU:
            return max(0, scaled)
        return scaled


@dataclass
class TrafficCounters:
    """Interconnect and controller-internal access counts"""
    interconnect_reads: int = 0
    interconnect_writes: int = 0
    internal_reads: int = 0
    internal_writes: int = 0


@dataclass
class ControllerState:
    """Memory contents, activation register and counters of one controller"""
    memory: np.ndarray
    activation: ActivationRegister = field(default_factory=ActivationRegister)
    counters: TrafficCounters = field(default_factory=TrafficCounters)


class MemoryController:
    """
    Single-threaded controller state machine; transactions execute in issue order
    """

    def __init__(self, size: int, mode: ControllerMode = ControllerMode.ACTIVE,
                 activation: Optional[ActivationRegister] = None):
        if size < 1:
            raise ValueError(f"memory size must be >= 1, got {size}")
        self.mode = mode
        self.state = ControllerState(
            memory=np.zeros(size, dtype=np.int64),
            activation=activation or ActivationRegister(),
        )

    @property
    def memory(self) -> np.ndarray:
        return self.state.memory

    @property
    def counters(self) -> TrafficCounters:
        return self.state.counters

    def apply(self, txn: MemTransaction) -> Optional[int]:
        """
        Execute one transaction

        Returns:
            The stored value for a normal read, otherwise None
        """
        memory, counters = self.state.memory, self.state.counters
        if txn.address >= memory.size:
            raise TransactionError(f"address {txn.address} outside memory of size {memory.size}")

        if txn.command is MemCommand.NORMAL_READ:
            counters.interconnect_reads += 1
            return int(memory[txn.address])

        if txn.command is MemCommand.NORMAL_WRITE:
            memory[txn.address] = txn.value
            counters.interconnect_writes += 1
            return None

        if self.mode is ControllerMode.PASSIVE:
            raise TransactionError(f"passive controller cannot execute {txn.command.value}")

        updated = int(memory[txn.address]) + txn.value
        if txn.command is MemCommand.ACTIVATE_ACCUMULATE:
            updated = self.state.activation.apply(updated)
        if not VALUE_MIN <= updated <= VALUE_MAX:
            raise TransactionError(f"{txn.command.value} at {txn.address} overflows the 64-bit memory word")
        memory[txn.address] = updated
        counters.internal_reads += 1
        counters.internal_writes += 1
        counters.interconnect_writes += 1
        return None


def run_trace(controller: MemoryController,
              stream: Iterable[MemTransaction]) -> Tuple[np.ndarray, TrafficCounters]:
    """
    Fold a transaction stream through a controller

    Returns:
        (copy of the final memory, copy of the counters)
    """
    for index, txn in enumerate(stream):
        try:
            controller.apply(txn)
        except TransactionError as e:
            raise TraceError(index, str(e))
    return controller.memory.copy(), replace(controller.counters)


def engine_trace(layer: ConvLayerShape, p: Partition, mode: ControllerMode,
                 activation: Optional[ActivationRegister] = None,
                 seed: int = 0,
                 groups: GroupTreatment = GroupTreatment.GROUPED,
                 max_elements: int = DEFAULT_MAX_ELEMENTS) -> List[MemTransaction]:
    """
    Partial-sum transactions the compute engine issues for a tiled layer

    The engine is driven against a scratch controller so that passive writes
    carry the read-back value plus the new partial sum. Output element
    (co, y, x) lives at address co*ho*wo + y*wo + x.
    """
    if groups is GroupTreatment.DENSE and layer.groups != 1:
        layer = replace(layer, groups=1)
    check_size(layer, max_elements)
    check_partition(layer, p)
    register = activation or ActivationRegister()
    scratch = MemoryController(layer.cout * layer.ho * layer.wo, mode, register)
    inputs, weights = make_tensors(layer, seed)
    plane = layer.ho * layer.wo
    stream: List[MemTransaction] = []

    def issue(txn: MemTransaction) -> Optional[int]:
        stream.append(txn)
        return scratch.apply(txn)

    for it in iterate_tiles(layer, p, inputs, weights):
        activate = it.last and not register.is_identity
        for offset, value in enumerate(it.psum.reshape(-1).tolist()):
            address = it.co_lo * plane + offset
            if mode is ControllerMode.PASSIVE:
                if it.first:
                    stored = value
                else:
                    stored = issue(MemTransaction(MemCommand.NORMAL_READ, address)) + value
                if activate:
                    stored = register.apply(stored)
                issue(MemTransaction(MemCommand.NORMAL_WRITE, address, stored))
            elif activate:
                # single-pass tiles activate onto the zero-initialised location
                issue(MemTransaction(MemCommand.ACTIVATE_ACCUMULATE, address, value))
            elif it.first:
                issue(MemTransaction(MemCommand.NORMAL_WRITE, address, value))
            else:
                issue(MemTransaction(MemCommand.ACCUMULATE, address, value))

    logger.debug(f"{layer.name}: {mode.value} trace of {len(stream)} transactions for {p}")
    return stream


def format_trace(stream: Iterable[MemTransaction],
                 counters: Optional[TrafficCounters] = None) -> str:
    """Trace file text: one `<CMD> <address> [<value>]` per line, counters as a final comment"""
    lines = [txn.to_line() for txn in stream]
    if counters is not None:
        lines.append(
            f"# reads={counters.interconnect_reads} writes={counters.interconnect_writes} "
            f"internal={counters.internal_reads}"
        )
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> List[MemTransaction]:
    """Parse trace file text, skipping blank and comment lines"""
    stream = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        try:
            command = MemCommand(parts[0])
            address = int(parts[1])
            value = int(parts[2]) if len(parts) > 2 else None
        except (ValueError, IndexError):
            raise TransactionError(f"line {line_number}: malformed trace record '{stripped}'")
        try:
            stream.append(MemTransaction(command, address, value))
        except TransactionError as e:
            raise TransactionError(f"line {line_number}: {e}")
    return stream


def activation_from_config(config: Dict) -> ActivationRegister:
    section = config.get('controller', {})
    return ActivationRegister(
        function=ActivationFunction(section.get('activation', 'identity')),
        shift=int(section.get('shift', 0)),
    )


def create_memory_controller(config: Dict, size: int,
                             mode: ControllerMode = ControllerMode.ACTIVE) -> MemoryController:
    """Factory function to create a controller with the configured activation register"""
    controller = MemoryController(size, mode, activation_from_config(config))
    logger.debug(f"Memory controller created - size: {size}, mode: {mode.value}")
    return controller
