from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import ValidationError
from slowapi import Limiter, _rate_limit_exceeded_handler
from slowapi.util import get_remote_address
from slowapi.errors import RateLimitExceeded
from contextlib import asynccontextmanager
from typing import List
import logging

from implied_leverage import __version__
from implied_leverage.core import settings, LeverageError
from implied_leverage.models import (
    BenchmarkRequest,
    BenchmarkResponse,
    GammaCurve,
    LeverageFunction,
    LeverageRequest,
    OracleRequest,
    OracleResult,
    ReturnSeries,
    TheoryKind,
    TheoryRequest,
    GammaKind,
    VolTermStructure
)
from implied_leverage.services import (
    bootstrap_errors,
    estimate_leverage,
    flat_term_structure,
    gamma_local_vol,
    gamma_sticky_delta,
    gamma_sticky_strike,
    run_oracle,
    skew_curve_from_smiles,
    theory_curves
)

# Configure logging
logging.basicConfig(
    level=logging.INFO if settings.debug else getattr(logging, settings.log_level.upper(), logging.WARNING),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# Initialize rate limiter
limiter = Limiter(key_func=get_remote_address)

THEORY_KINDS = {
    TheoryKind.MONEYNESS: [GammaKind.THEORY_MONEYNESS],
    TheoryKind.STRIKE: [GammaKind.THEORY_STRIKE],
    TheoryKind.BOTH: [GammaKind.THEORY_MONEYNESS, GammaKind.THEORY_STRIKE]
}


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Lifespan context manager for startup and shutdown events."""
    logger.info(f"Starting Implied Leverage API {__version__}...")
    logger.info(
        f"Rate limit {settings.max_requests_per_minute}/minute, "
        f"simulations up to {settings.api_max_sim_days} days"
    )
    yield
    logger.info("Shutting down Implied Leverage API...")


# Initialize FastAPI app
app = FastAPI(
    title="Implied Leverage API",
    description="Leverage correlations and the implied-volatility response to returns",
    version=__version__,
    lifespan=lifespan
)

# Add rate limiter to app
app.state.limiter = limiter
app.add_exception_handler(RateLimitExceeded, _rate_limit_exceeded_handler)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.allowed_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/api/health")
async def health_check():
    """Health check endpoint."""
    return {
        "status": "healthy",
        "version": __version__
    }


@app.post("/api/leverage", response_model=LeverageFunction)
@limiter.limit(f"{settings.max_requests_per_minute}/minute")
def leverage(payload: LeverageRequest, request: Request):
    """
    Estimate g_L from daily returns, with bootstrap errors when n_boot is given.

    Raises:
        LeverageError: series-too-short, zero-variance, invalid-parameter
    """
    width = len(str(len(payload.returns)))
    returns = ReturnSeries(
        ticker="API",
        dates=tuple(f"{i:0{width}d}" for i in range(len(payload.returns))),
        returns=tuple(payload.returns)
    )
    if payload.n_boot is not None:
        return bootstrap_errors(
            returns,
            payload.max_lag,
            n_boot=payload.n_boot,
            block_len=payload.block_len,
            seed=payload.seed
        )
    return estimate_leverage(returns, payload.max_lag)


@app.post("/api/theory", response_model=List[GammaCurve])
def theory(payload: TheoryRequest):
    """Theoretical gamma curves; the term structure defaults to flat at gl.sigma."""
    maturities = sorted(set(payload.maturities))
    if payload.term is None:
        term = flat_term_structure(payload.gl, maturities)
    else:
        missing = [m for m in maturities if m not in payload.term.maturities]
        if missing:
            raise LeverageError(f"term structure has no ATM vol for maturities {missing}", code="maturity-mismatch")
        term = VolTermStructure(
            maturities=tuple(maturities),
            vols=tuple(payload.term.vols[payload.term.maturities.index(m)] for m in maturities)
        )
    return theory_curves(payload.gl, term, THEORY_KINDS[payload.kind])


@app.post("/api/benchmarks", response_model=BenchmarkResponse)
def benchmarks(payload: BenchmarkRequest):
    """Sticky-strike, sticky-delta and local-vol curves from a skew curve or quoted smiles."""
    skew = payload.skew if payload.skew is not None else skew_curve_from_smiles(payload.smiles, payload.term)
    sticky = gamma_sticky_strike(skew, payload.term)
    return BenchmarkResponse(
        sticky_strike=sticky,
        sticky_delta=gamma_sticky_delta(payload.term.maturities),
        local_vol=gamma_local_vol(sticky)
    )


@app.post("/api/oracle", response_model=List[OracleResult])
@limiter.limit(f"{settings.max_requests_per_minute}/minute")
def oracle(payload: OracleRequest, request: Request):
    """
    Run simulate -> kernel_to_gl -> gamma_moneyness -> forward_vol_slope.

    Raises:
        LeverageError: invalid-parameter when n_days exceeds the service limit;
            unstable-kernel, excessive-clamping, series-too-short
    """
    if payload.config.n_days > settings.api_max_sim_days:
        raise LeverageError(
            f"n_days {payload.config.n_days} exceeds the service limit {settings.api_max_sim_days}",
            code="invalid-parameter"
        )
    return run_oracle(payload.config, payload.maturities, overlapping=payload.overlapping)


# ============================================================================
# ERROR HANDLERS
# ============================================================================

@app.exception_handler(LeverageError)
async def leverage_error_handler(request: Request, exc: LeverageError):
    """Invalid inputs and violated preconditions."""
    logger.warning(f"{request.url.path}: {exc.code}: {exc.message}")
    return JSONResponse(status_code=400, content={"code": exc.code, "detail": exc.message})


@app.exception_handler(RequestValidationError)
@app.exception_handler(ValidationError)
async def validation_error_handler(request: Request, exc):
    errors = exc.errors()
    detail = errors[0]["msg"] if errors else str(exc)
    logger.warning(f"{request.url.path}: invalid-input: {detail}")
    return JSONResponse(status_code=400, content={"code": "invalid-input", "detail": detail})


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    """Global exception handler for unexpected errors."""
    logger.error(f"Unhandled exception: {str(exc)}", exc_info=True)
    return JSONResponse(
        status_code=500,
        content={"code": "internal", "detail": "An unexpected error occurred. Please try again later."}
    )


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "main:app",
        host="0.0.0.0",
        port=8000,
        reload=settings.debug
    )
