"""Pluggable incentive layer: mint-time hooks plus a block-reward plugin.

The chain itself is economically empty. Rewards enter only through hooks that
run inside minting: before-hooks may append transactions to the candidate
block (never remove or reorder the user transactions), after-hooks observe the
finalized block. With no hooks registered, minting is the identity on the
proposal apart from attaching the witness certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .core_types import (
    AccountBody,
    Block,
    ChainConfig,
    COINBASE_INDEX,
    NodeId,
    Outpoint,
    SYSTEM_ID,
    Transaction,
    TxModel,
    TxOutput,
    UtxoBody,
    coinbase_transaction,
)


@dataclass(frozen=True, slots=True)
class MintContext:
    """What a hook may look at: the proposal and the mint circumstances.

    system_nonce is the next unused nonce of the system account at the
    proposal's parent, needed to build account-model coinbase credits.
    """

    proposal: Block
    witnesses: tuple[NodeId, ...]
    cfg: ChainConfig
    system_nonce: int = 0


BeforeHook = Callable[[MintContext], Sequence[Transaction]]
AfterHook = Callable[[Block, MintContext], None]


@dataclass(frozen=True, slots=True)
class MintHooks:
    """Immutable hook registry; execution order = registration order."""

    before: tuple[BeforeHook, ...] = ()
    after: tuple[AfterHook, ...] = ()


NO_HOOKS = MintHooks()


def register_hook(hooks: MintHooks, phase: str, hook: Callable) -> MintHooks:
    """Return a registry with ``hook`` appended to the given phase."""
    if phase == "before":
        return MintHooks(hooks.before + (hook,), hooks.after)
    if phase == "after":
        return MintHooks(hooks.before, hooks.after + (hook,))
    raise ValueError(f"unknown hook phase: {phase!r}")


@dataclass(frozen=True, slots=True)
class RewardSchedule:
    proposer_reward: int
    witness_subsidy: int

    def __post_init__(self) -> None:
        if self.proposer_reward < 0 or self.witness_subsidy < 0:
            raise ValueError("rewards must be non-negative")

    def is_zero(self) -> bool:
        return self.proposer_reward == 0 and self.witness_subsidy == 0


def coinbase_credits(
    proposer: NodeId, witnesses: Sequence[NodeId], schedule: RewardSchedule
) -> tuple[tuple[NodeId, int], ...]:
    """(party, amount) pairs, proposer first, zero amounts dropped."""
    credits = []
    if schedule.proposer_reward > 0:
        credits.append((proposer, schedule.proposer_reward))
    if schedule.witness_subsidy > 0:
        for witness in witnesses:
            credits.append((witness, schedule.witness_subsidy))
    return tuple(credits)


def build_coinbase(
    model: TxModel,
    height: int,
    proposer: NodeId,
    witnesses: Sequence[NodeId],
    schedule: RewardSchedule,
    system_nonce: int,
) -> tuple[Transaction, ...]:
    """The system transactions crediting a block's proposer and witnesses.

    UTXO model: one transaction whose single input is a height marker
    (tx_id = height, index = COINBASE_INDEX), keeping coinbase ids unique
    across heights even when the credited parties repeat. Account model: one
    single-recipient system transaction per credit, consecutive nonces.
    An all-zero schedule produces no transactions at all.
    """
    credits = coinbase_credits(proposer, witnesses, schedule)
    if not credits:
        return ()
    if model is TxModel.UTXO:
        marker = Outpoint(tx_id=height, index=COINBASE_INDEX)
        outputs = tuple(TxOutput(owner, amount) for owner, amount in credits)
        return (coinbase_transaction(UtxoBody((marker,), outputs)),)
    txs = []
    for offset, (owner, amount) in enumerate(credits):
        body = AccountBody(recipient=owner, amount=amount, nonce=system_nonce + offset)
        txs.append(coinbase_transaction(body))
    return tuple(txs)


def bitcoin_like_plugin(schedule: RewardSchedule, model: TxModel) -> BeforeHook:
    """Before-hook appending one coinbase credit set per minted block."""

    def hook(ctx: MintContext) -> tuple[Transaction, ...]:
        return build_coinbase(
            model,
            ctx.proposal.height,
            ctx.proposal.proposer,
            ctx.witnesses,
            schedule,
            ctx.system_nonce,
        )

    return hook


CoinbaseRule = Callable[[Block, tuple[NodeId, ...], int], tuple[Transaction, ...]]


def make_coinbase_rule(schedule: RewardSchedule, model: TxModel) -> CoinbaseRule:
    """Validation-side twin of the plugin: recompute the expected coinbase.

    Ledgers configured with this rule reject blocks whose system transactions
    differ from what the schedule prescribes for (proposer, witnesses, height).
    """

    def rule(
        block: Block, witnesses: tuple[NodeId, ...], system_nonce: int
    ) -> tuple[Transaction, ...]:
        return build_coinbase(
            model, block.height, block.proposer, witnesses, schedule, system_nonce
        )

    return rule
