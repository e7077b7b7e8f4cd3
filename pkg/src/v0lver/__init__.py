"""Agent-based simulation of an LVR-rebating CFMM with committed order flow.

The package layers cleanly: curve math (``cfmm``), rebated price moves and
the vault (``rebate``), batch escrow and uniform-price settlement
(``allocation``), the block-by-block protocol state machine (``engine``),
stochastic agents (``agents``), and the simulation driver plus experiment
suite (``sim``) behind a CLI (``cli``).
"""

from .agents import PriceProcess, decide_update, gen_user_orders, producer_utility
from .allocation import (
    AllocationPool,
    Fill,
    Order,
    OrderSide,
    Settlement,
    allocation_bound,
    clearing_price_with_limits,
    create_allocation_pool,
    escrow_size,
    redistribute,
    settle_market_batch,
    verify_clearing_price,
)
from .cfmm import (
    CONSTANT_PRODUCT,
    CURVES,
    ConstantProduct,
    Price,
    Reserves,
    lvr_value,
    max_lvr,
)
from .config import (
    FlowModel,
    PriceModel,
    ProducerModel,
    ScenarioConfig,
    builtin_scenarios,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from .engine import BlockReceipt, ChainState, ExecutionReceipt, Oct, OctState, UpdateReceipt
from .errors import (
    ConfigError,
    DomainError,
    FundingError,
    InvalidTransition,
    InvariantViolation,
    V0lverError,
    VerificationError,
)
from .rebate import (
    ZERO_REBATE,
    RebateSchedule,
    Vault,
    apply_rebated_move,
    producer_arb_payoff,
    vault_reenter,
)
from .sim import (
    RunMetrics,
    RunResult,
    baseline_cfmm_replay,
    dominance_sweep,
    equilibrium_experiment,
    lvr_experiment,
    run_many,
    run_scenario,
    user_price_experiment,
)

__version__ = "0.1.0"
