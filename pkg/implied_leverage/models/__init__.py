"""Data models and schemas."""
from implied_leverage.models.schemas import (
    ReturnKind,
    GammaKind,
    KernelForm,
    NoiseKind,
    TheoryKind,
    PriceSeries,
    ReturnSeries,
    ImpliedVolPanel,
    AlignedPanel,
    LeverageFunction,
    VolTermStructure,
    GammaCurve,
    SkewCurve,
    SmileSlice,
    AmplificationFit,
    RegressionResult,
    Kernel,
    SimConfig,
    SimDiagnostics,
    OracleResult,
    CompareReport,
    LeverageRequest,
    TheoryRequest,
    BenchmarkRequest,
    BenchmarkResponse,
    OracleRequest
)

__all__ = [
    "ReturnKind",
    "GammaKind",
    "KernelForm",
    "NoiseKind",
    "TheoryKind",
    "PriceSeries",
    "ReturnSeries",
    "ImpliedVolPanel",
    "AlignedPanel",
    "LeverageFunction",
    "VolTermStructure",
    "GammaCurve",
    "SkewCurve",
    "SmileSlice",
    "AmplificationFit",
    "RegressionResult",
    "Kernel",
    "SimConfig",
    "SimDiagnostics",
    "OracleResult",
    "CompareReport",
    "LeverageRequest",
    "TheoryRequest",
    "BenchmarkRequest",
    "BenchmarkResponse",
    "OracleRequest"
]
