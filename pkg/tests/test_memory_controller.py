"""
Test Suite for the active memory controller model
Command semantics, traffic counters, engine traces and the trace file format
"""

import numpy as np
import pytest
from pathlib import Path

# Adjust import paths for testing
import sys
sys.path.append(str(Path(__file__).parent.parent))

from backend.analytic_model import ControllerMode, Partition, PartitionRangeError
from backend.memory_controller import (
    ActivationFunction, ActivationRegister, MemCommand, MemTransaction, MemoryController,
    TraceError, TrafficCounters, TransactionError, activation_from_config,
    create_memory_controller, engine_trace, format_trace, parse_trace, run_trace,
)
from backend.model_catalog import ConvLayerShape
from backend.tile_simulator import SimulationSizeError, simulate_layer

PASSIVE, ACTIVE = ControllerMode.PASSIVE, ControllerMode.ACTIVE
R, W, ACC, ACT = (MemCommand.NORMAL_READ, MemCommand.NORMAL_WRITE,
                  MemCommand.ACCUMULATE, MemCommand.ACTIVATE_ACCUMULATE)
RELU = ActivationRegister(ActivationFunction.RELU)


@pytest.fixture
def tiny():
    return ConvLayerShape("tiny", 2, 2, 1, 1, 0, 2, 2)


@pytest.fixture
def single_output():
    """One output element fed by two input channels"""
    return ConvLayerShape("point", 1, 1, 1, 1, 0, 2, 1)


def final_memory(layer, p, mode, activation=None, seed=0):
    stream = engine_trace(layer, p, mode, activation, seed)
    controller = MemoryController(layer.cout * layer.ho * layer.wo, mode, activation)
    memory, counters = run_trace(controller, stream)
    return memory, counters


class TestTransactions:

    def test_read_carries_no_value(self):
        with pytest.raises(TransactionError):
            MemTransaction(R, 0, 5)

    @pytest.mark.parametrize("command", [W, ACC, ACT])
    def test_write_class_needs_value(self, command):
        with pytest.raises(TransactionError, match="needs a value"):
            MemTransaction(command, 0)

    @pytest.mark.parametrize("value", [2**63, -2**63 - 1, 10**20])
    def test_value_outside_memory_word(self, value):
        with pytest.raises(TransactionError, match="64-bit"):
            MemTransaction(W, 0, value)

    def test_word_limits_accepted(self):
        assert MemTransaction(W, 0, 2**63 - 1).value == 2**63 - 1
        assert MemTransaction(ACC, 0, -2**63).value == -2**63

    def test_negative_address(self):
        with pytest.raises(TransactionError):
            MemTransaction(R, -1)


class TestApply:

    def test_accumulate_updates_in_place(self):
        controller = MemoryController(8)
        controller.apply(MemTransaction(W, 7, 5))
        controller.apply(MemTransaction(ACC, 7, 3))
        assert controller.memory[7] == 8
        assert controller.counters == TrafficCounters(0, 2, 1, 1)

    def test_activate_accumulate_relu(self):
        controller = MemoryController(4, activation=RELU)
        controller.apply(MemTransaction(W, 2, -1))
        controller.apply(MemTransaction(ACT, 2, -3))
        assert controller.memory[2] == 0

    def test_accumulate_onto_zero(self):
        controller = MemoryController(4)
        controller.apply(MemTransaction(ACC, 1, -6))
        assert controller.memory[1] == -6

    def test_read_returns_stored_value(self):
        controller = MemoryController(4)
        controller.apply(MemTransaction(W, 3, 42))
        assert controller.apply(MemTransaction(R, 3)) == 42
        assert controller.counters.interconnect_reads == 1

    def test_shift_before_activation(self):
        register = ActivationRegister(ActivationFunction.IDENTITY, shift=2)
        controller = MemoryController(1, activation=register)
        controller.apply(MemTransaction(ACT, 0, 17))
        assert controller.memory[0] == 4

    def test_address_out_of_range(self):
        with pytest.raises(TransactionError, match="outside memory"):
            MemoryController(4).apply(MemTransaction(W, 4, 1))

    @pytest.mark.parametrize("command", [ACC, ACT])
    def test_passive_controller_rejects_update_commands(self, command):
        with pytest.raises(TransactionError, match="passive"):
            MemoryController(4, PASSIVE).apply(MemTransaction(command, 0, 1))

    def test_negative_shift_rejected(self):
        with pytest.raises(ValueError):
            ActivationRegister(shift=-1)


class TestRunTrace:

    def test_empty_stream(self):
        memory, counters = run_trace(MemoryController(3), [])
        assert not memory.any()
        assert counters == TrafficCounters()

    def test_error_reports_stream_index(self):
        stream = [MemTransaction(W, 0, 1), MemTransaction(W, 1, 1), MemTransaction(W, 9, 1)]
        with pytest.raises(TraceError) as excinfo:
            run_trace(MemoryController(4), stream)
        assert excinfo.value.index == 2

    def test_accumulate_overflow_reports_stream_index(self):
        stream = [MemTransaction(W, 0, 2**63 - 1), MemTransaction(ACC, 0, 1)]
        controller = MemoryController(4)
        with pytest.raises(TraceError, match="overflows") as excinfo:
            run_trace(controller, stream)
        assert excinfo.value.index == 1
        assert controller.memory[0] == 2**63 - 1
        assert controller.counters.internal_writes == 0

    def test_returned_state_is_a_snapshot(self):
        controller = MemoryController(2)
        memory, counters = run_trace(controller, [MemTransaction(W, 0, 3)])
        controller.apply(MemTransaction(W, 0, 9))
        assert memory[0] == 3
        assert counters.interconnect_writes == 1


class TestEngineTrace:

    def test_passive_single_output(self, single_output):
        stream = engine_trace(single_output, Partition(1, 1), PASSIVE)
        assert [t.command for t in stream] == [W, R, W]

    def test_active_single_output(self, single_output):
        stream = engine_trace(single_output, Partition(1, 1), ACTIVE)
        assert [t.command for t in stream] == [W, ACC]

    @pytest.mark.parametrize("mode", [PASSIVE, ACTIVE])
    def test_single_iteration_writes_once(self, tiny, mode):
        stream = engine_trace(tiny, Partition(2, 2), mode)
        assert [t.command for t in stream] == [W] * 8

    def test_active_with_activation_ends_in_activate(self, single_output):
        stream = engine_trace(single_output, Partition(1, 1), ACTIVE, RELU)
        assert [t.command for t in stream] == [W, ACT]

    def test_passive_write_carries_running_sum(self, single_output):
        stream = engine_trace(single_output, Partition(1, 1), PASSIVE, seed=3)
        memory, _ = final_memory(single_output, Partition(2, 1), PASSIVE, seed=3)
        assert stream[-1].value == memory[0]

    def test_passive_traffic_matches_simulator(self, tiny):
        _, counters = final_memory(tiny, Partition(1, 1), PASSIVE)
        counts = simulate_layer(tiny, Partition(1, 1), PASSIVE)
        assert counters.interconnect_reads == counts.psum_reads == 8
        assert counters.interconnect_writes == counts.psum_writes

    def test_active_matches_passive_memory(self, tiny):
        passive, _ = final_memory(tiny, Partition(1, 1), PASSIVE, seed=4)
        active, counters = final_memory(tiny, Partition(1, 1), ACTIVE, seed=4)
        assert counters.interconnect_reads == 0
        assert np.array_equal(passive, active)

    def test_relu_clamps_final_values(self):
        layer = ConvLayerShape("r", 3, 3, 3, 1, 1, 4, 3)
        plain, _ = final_memory(layer, Partition(1, 2), PASSIVE, seed=8)
        for mode in ControllerMode:
            clamped, _ = final_memory(layer, Partition(1, 2), mode, RELU, seed=8)
            assert np.array_equal(clamped, np.maximum(plain, 0))

    def test_partition_out_of_range(self, tiny):
        with pytest.raises(PartitionRangeError):
            engine_trace(tiny, Partition(3, 1), PASSIVE)

    def test_oversize_layer(self):
        layer = ConvLayerShape("big", 112, 112, 3, 1, 1, 32, 32)
        with pytest.raises(SimulationSizeError):
            engine_trace(layer, Partition(1, 1), ACTIVE)


class TestTraceFile:

    def test_format(self):
        stream = [MemTransaction(W, 0, 5), MemTransaction(R, 0), MemTransaction(ACC, 0, -2)]
        text = format_trace(stream, TrafficCounters(1, 2, 1, 1))
        assert text == "W 0 5\nR 0\nACC 0 -2\n# reads=1 writes=2 internal=1\n"

    def test_parse_skips_comments(self, tiny):
        stream = engine_trace(tiny, Partition(1, 1), ACTIVE, seed=2)
        assert parse_trace(format_trace(stream, TrafficCounters())) == stream

    def test_malformed_record(self):
        with pytest.raises(TransactionError, match="line 2"):
            parse_trace("W 0 1\nXOR 0 1\n")

    def test_oversized_value_reports_line(self):
        with pytest.raises(TransactionError, match="line 2: .*64-bit"):
            parse_trace("W 0 1\nW 1 99999999999999999999\n")


class TestControllerConfig:

    def test_activation_from_config(self):
        register = activation_from_config({'controller': {'activation': 'relu', 'shift': 3}})
        assert register == ActivationRegister(ActivationFunction.RELU, 3)

    def test_defaults_to_identity(self):
        assert activation_from_config({}).is_identity

    def test_factory(self):
        controller = create_memory_controller({'controller': {'activation': 'relu'}}, 16, PASSIVE)
        assert controller.memory.size == 16
        assert controller.mode is PASSIVE
        assert controller.state.activation.function is ActivationFunction.RELU
