"""Desk-scale protocol constructions."""

from measim.protocol.codebook import Codebook, prescribed_sizes, sample_codebook
from measim.protocol.decoding import DecodeResult, sequential_decode
from measim.protocol.faithfulness import (
    FaithfulnessReport,
    faithfulness_direct,
    faithfulness_metric,
    faithfulness_purified,
)
from measim.protocol.hashing import HashFunction, two_universal_hash
from measim.protocol.instrument import InstrumentSimulation, build_instrument_simulation
from measim.protocol.measurement import (
    DEFAULT_EPS,
    SimulatedPovm,
    SourceContext,
    XiPair,
    build_simulated_povm,
    build_xi,
    check_chernoff_events,
)
from measim.protocol.qsi import CdcQsiReport, McQsiReport, simulate_cdcqsi, simulate_mcqsi
from measim.protocol.runs import McRunReport, NonFeedbackReport, simulate_mc, simulate_mc_instr, simulate_nonfeedback

__all__ = [
    "Codebook",
    "prescribed_sizes",
    "sample_codebook",
    "DecodeResult",
    "sequential_decode",
    "FaithfulnessReport",
    "faithfulness_direct",
    "faithfulness_metric",
    "faithfulness_purified",
    "HashFunction",
    "two_universal_hash",
    "InstrumentSimulation",
    "build_instrument_simulation",
    "DEFAULT_EPS",
    "SimulatedPovm",
    "SourceContext",
    "XiPair",
    "build_simulated_povm",
    "build_xi",
    "check_chernoff_events",
    "CdcQsiReport",
    "McQsiReport",
    "simulate_cdcqsi",
    "simulate_mcqsi",
    "McRunReport",
    "NonFeedbackReport",
    "simulate_mc",
    "simulate_mc_instr",
    "simulate_nonfeedback",
]
