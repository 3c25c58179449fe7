"""Seeded discrete-event network simulator driving the full protocol.

N nodes (some adversarial) exchange transactions, witness requests, witness
signatures, blocks, fork-win announcements, and pull requests over a lossy
broadcast network: every send reaches each addressee independently with
probability r after a sampled latency, measured in logical ticks. One seeded
generator drives every random draw, so a run is a pure function of its config.

Honest nodes follow the ledger and witness rules exactly. Proposal slots are
staggered round-robin so the common case is a single live proposer, but loss
and latency still produce concurrent proposals, forks, and orphans, which is
the behavior under test. The module also houses the two Monte Carlo oracles
used by the analysis layer: the witness-corruption experiment (real proposal,
refusal, and signing path) and the abstract miss-model for the misled bound.
"""

from __future__ import annotations

import heapq
import json
import random
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .analysis import SafetyParams, misled_exponent, wilson_interval
from .core_types import (
    AccountBody,
    Block,
    ChainConfig,
    MAX_HASH,
    NodeId,
    SignatureScheme,
    Transaction,
    TxModel,
    TxOutput,
    UtxoBody,
    enc_u64,
    get_scheme,
    make_transaction,
)
from .incentive import (
    MintHooks,
    NO_HOOKS,
    RewardSchedule,
    bitcoin_like_plugin,
    make_coinbase_rule,
    register_hook,
)
from .ledger import (
    ApplyStatus,
    ChainState,
    ForkWinMsg,
    TxIndices,
    TxReject,
    confirmed_conflicts,
    fund_accounts,
    fund_utxos,
)
from .scoring import block_score

# mempool entries that can never validate again once the head rejects them
_DEAD_TX = (TxReject.NONCE_REUSE, TxReject.DOUBLE_SPEND, TxReject.UNKNOWN_INPUT)
from .witness import (
    Refusal,
    WitnessRequest,
    WitnessSignature,
    is_eligible_witness,
    mint_block,
    propose_block,
    sign_witness,
    witness_message,
)


class SimConfigError(ValueError):
    """A config field failed validation; names the offending key."""

    def __init__(self, key: str, message: str) -> None:
        self.key = key
        super().__init__(f"{key}: {message}")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class LatencySpec:
    """Delivery delay in ticks: fixed value or uniform integer range."""

    kind: str = "fixed"
    lo: int = 1
    hi: int = 1

    def validate(self) -> None:
        if self.kind not in ("fixed", "uniform"):
            raise SimConfigError("latency.kind", "must be 'fixed' or 'uniform'")
        if self.lo < 0 or self.hi < self.lo:
            raise SimConfigError("latency", "need 0 <= lo <= hi")

    def sample(self, rng: random.Random) -> int:
        if self.kind == "fixed":
            return self.lo
        return rng.randint(self.lo, self.hi)

    @classmethod
    def fixed(cls, ticks: int) -> "LatencySpec":
        return cls("fixed", ticks, ticks)

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "LatencySpec":
        return cls("uniform", lo, hi)

    def to_dict(self) -> dict:
        if self.kind == "fixed":
            return {"kind": "fixed", "ticks": self.lo}
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, data: dict) -> "LatencySpec":
        kind = data.get("kind", "fixed")
        if kind == "fixed":
            ticks = data.get("ticks", 1)
            return cls("fixed", ticks, ticks)
        return cls("uniform", data.get("lo", 1), data.get("hi", 1))


class Strategy(Enum):
    NONE = "none"
    DOUBLE_SPEND = "double_spend"
    EQUIVOCATE = "equivocate"
    INVALID_BLOCK_PUSH = "invalid_block_push"


# Witness eligibility for simulated nodes: each proposer's neighborhood is
# roughly 60% of the network. With every node eligible for every proposer,
# one losing proposal at a height exhausts the whole network's one-signature-
# per-height budget and the height can deadlock; distinct neighborhoods keep
# fresh witnesses available, which is what the distance predicate is for.
SIM_WITNESS_THRESHOLD = (MAX_HASH // 5) * 3


def default_sim_chain() -> ChainConfig:
    return ChainConfig(witness_threshold=SIM_WITNESS_THRESHOLD)


@dataclass(frozen=True, slots=True)
class SimConfig:
    n_nodes: int = 20
    adversary_fraction: float = 0.0
    delivery_ratio: float = 0.9
    latency: LatencySpec = LatencySpec.uniform(1, 3)
    chain: ChainConfig = field(default_factory=default_sim_chain)
    tx_rate: float = 1.5
    duration: int = 200
    seed: int = 42
    adversary_strategy: Strategy = Strategy.NONE
    tx_model: TxModel = TxModel.ACCOUNT
    scheme: str = "stub"
    rewards: "RewardSchedule | None" = None
    fork_win_extra: int = 0  # the l of the safety analysis
    slot_spacing: int = 3  # ticks between consecutive proposal slots
    proposal_timeout: int = 16
    orphan_timeout: int = 512
    mempool_cap: int = 4096
    max_block_txs: int = 12
    genesis_units: int = 10**9
    genesis_outputs: int = 96
    utxo_unit: int = 1000
    replay_check: bool = False
    trace: bool = False

    def validate(self) -> None:
        if self.n_nodes < 2:
            raise SimConfigError("n_nodes", "need at least 2 nodes")
        if not 0.0 <= self.adversary_fraction <= 1.0:
            raise SimConfigError("adversary_fraction", "must be in [0, 1]")
        if not 0.0 < self.delivery_ratio <= 1.0:
            raise SimConfigError("delivery_ratio", "must be in (0, 1]")
        if self.duration < 1:
            raise SimConfigError("duration", "must be positive")
        if self.tx_rate < 0:
            raise SimConfigError("tx_rate", "must be non-negative")
        if self.fork_win_extra < 0:
            raise SimConfigError("fork_win_extra", "must be non-negative")
        if self.slot_spacing < 1:
            raise SimConfigError("slot_spacing", "must be positive")
        if self.proposal_timeout < 1:
            raise SimConfigError("proposal_timeout", "must be positive")
        if self.scheme not in ("stub", "ed25519"):
            raise SimConfigError("scheme", "must be 'stub' or 'ed25519'")
        self.latency.validate()

    def to_dict(self) -> dict:
        return {
            "config_version": 1,
            "n_nodes": self.n_nodes,
            "adversary_fraction": self.adversary_fraction,
            "delivery_ratio": self.delivery_ratio,
            "latency": self.latency.to_dict(),
            "chain": {
                "tx_count_min": self.chain.tx_count_min,
                "witness_m": self.chain.witness_m,
                "confirm_depth": self.chain.confirm_depth,
                "witness_threshold": f"{self.chain.witness_threshold:x}",
            },
            "tx_rate": self.tx_rate,
            "duration": self.duration,
            "seed": self.seed,
            "adversary_strategy": self.adversary_strategy.value,
            "tx_model": self.tx_model.name.lower(),
            "scheme": self.scheme,
            "rewards": None
            if self.rewards is None
            else {
                "proposer_reward": self.rewards.proposer_reward,
                "witness_subsidy": self.rewards.witness_subsidy,
            },
            "fork_win_extra": self.fork_win_extra,
            "slot_spacing": self.slot_spacing,
            "proposal_timeout": self.proposal_timeout,
            "orphan_timeout": self.orphan_timeout,
            "mempool_cap": self.mempool_cap,
            "max_block_txs": self.max_block_txs,
            "genesis_units": self.genesis_units,
            "genesis_outputs": self.genesis_outputs,
            "utxo_unit": self.utxo_unit,
            "replay_check": self.replay_check,
            "trace": self.trace,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {
            "config_version",
            "n_nodes",
            "adversary_fraction",
            "delivery_ratio",
            "latency",
            "chain",
            "tx_rate",
            "duration",
            "seed",
            "adversary_strategy",
            "tx_model",
            "scheme",
            "rewards",
            "fork_win_extra",
            "slot_spacing",
            "proposal_timeout",
            "orphan_timeout",
            "mempool_cap",
            "max_block_txs",
            "genesis_units",
            "genesis_outputs",
            "utxo_unit",
            "replay_check",
            "trace",
        }
        for key in data:
            if key not in known:
                raise SimConfigError(key, "unknown config key")
        kwargs: dict = {}
        for key in (
            "n_nodes",
            "adversary_fraction",
            "delivery_ratio",
            "tx_rate",
            "duration",
            "seed",
            "scheme",
            "fork_win_extra",
            "slot_spacing",
            "proposal_timeout",
            "orphan_timeout",
            "mempool_cap",
            "max_block_txs",
            "genesis_units",
            "genesis_outputs",
            "utxo_unit",
            "replay_check",
            "trace",
        ):
            if key in data:
                kwargs[key] = data[key]
        if "latency" in data:
            kwargs["latency"] = LatencySpec.from_dict(data["latency"])
        if "chain" in data:
            raw = dict(data["chain"])
            threshold = raw.get("witness_threshold", SIM_WITNESS_THRESHOLD)
            if isinstance(threshold, str):
                threshold = int(threshold, 16)
            raw["witness_threshold"] = threshold
            try:
                kwargs["chain"] = ChainConfig(**raw)
            except (TypeError, ValueError) as exc:
                raise SimConfigError("chain", str(exc)) from None
        if "adversary_strategy" in data:
            try:
                kwargs["adversary_strategy"] = Strategy(data["adversary_strategy"])
            except ValueError:
                raise SimConfigError(
                    "adversary_strategy", f"unknown strategy {data['adversary_strategy']!r}"
                ) from None
        if "tx_model" in data:
            name = str(data["tx_model"]).upper()
            if name not in TxModel.__members__:
                raise SimConfigError("tx_model", f"unknown model {data['tx_model']!r}")
            kwargs["tx_model"] = TxModel[name]
        if data.get("rewards") is not None:
            raw = data["rewards"]
            try:
                kwargs["rewards"] = RewardSchedule(
                    raw.get("proposer_reward", 0), raw.get("witness_subsidy", 0)
                )
            except (TypeError, ValueError, AttributeError) as exc:
                raise SimConfigError("rewards", str(exc)) from None
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


# ---------------------------------------------------------------------------
# wire messages
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TxGossip:
    tx: Transaction


@dataclass(frozen=True, slots=True)
class WitnessReqMsg:
    req: WitnessRequest


@dataclass(frozen=True, slots=True)
class WitnessSigMsg:
    block_hash: int
    sig: WitnessSignature


@dataclass(frozen=True, slots=True)
class BlockGossip:
    block: Block


@dataclass(frozen=True, slots=True)
class ForkWinGossip:
    msg: ForkWinMsg


@dataclass(frozen=True, slots=True)
class PullReq:
    want: int  # block hash the sender is missing
    asker: int  # node index to reply to


@dataclass(frozen=True, slots=True)
class PullReply:
    blocks: tuple[Block, ...]


@dataclass(frozen=True, slots=True)
class SimEvent:
    """One scheduled occurrence; processed in (at, seq) order."""

    at: int
    kind: str
    detail: str = ""


# event kinds (heap discriminators)
EV_DELIVER = 0
EV_INJECT = 1
EV_PROPOSE = 2
EV_TIMEOUT = 3


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class SimReport:
    """Outcome counters of one run; a pure function of the config."""

    seed: int
    misled_events: int = 0
    hard_forks: int = 0
    invalid_minted: int = 0
    blocks_minted: int = 0
    txs_confirmed: int = 0
    fork_win_msgs: int = 0
    confirmed_conflict_nodes: int = 0
    prefix_agreement: bool = True
    proposals: int = 0
    proposals_expired: int = 0
    txs_injected: int = 0
    txs_skipped: int = 0
    switches: int = 0
    orphans_expired: int = 0
    honest_nodes: int = 0
    max_height: int = 0
    min_confirmed_height: int = 0
    per_node_head: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = dict(self.__dict__)
        payload["trace"] = [
            {"at": ev.at, "kind": ev.kind, "detail": ev.detail} for ev in self.trace
        ]
        return json.dumps(payload, indent=2, sort_keys=True)


COUNTER_FIELDS = (
    "misled_events",
    "hard_forks",
    "invalid_minted",
    "blocks_minted",
    "txs_confirmed",
    "fork_win_msgs",
    "proposals",
    "switches",
    "orphans_expired",
)


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------


@dataclass
class _Pending:
    """A proposal awaiting witness signatures."""

    req: WitnessRequest
    sigs: dict[NodeId, WitnessSignature] = field(default_factory=dict)


class HonestNode:
    """Protocol-following participant: ledger, mempool, wallet, witness log."""

    is_adversary = False

    def __init__(self, sim: "Simulator", index: int, secret: bytes, node_id: NodeId):
        self.sim = sim
        self.index = index
        self.secret = secret
        self.node_id = node_id
        cfg = sim.cfg
        self.state = ChainState(
            cfg.chain,
            sim.scheme,
            sim.genesis_indices,
            coinbase_rule=sim.coinbase_rule,
            orphan_timeout=cfg.orphan_timeout,
            replay_check=cfg.replay_check,
            snapshot_store=sim.snapshot_store,
            verdict_cache=sim.verdict_cache,
        )
        self.mempool: dict[int, Transaction] = {}
        self.witness_log: dict[int, int] = {}
        self.pending: "_Pending | None" = None
        self.forwarded: set[int] = set()
        self.wallet_nonce = 0
        self.wallet_grants: deque = deque()
        # confirmation history for misled detection
        self.ever_confirmed: dict[int, int] = {0: self.state.genesis.block_hash}
        self.recorded_to = 0
        self.self_conflicted = False

    # -- wallet ------------------------------------------------------------

    def build_payment(self) -> "Transaction | None":
        sim = self.sim
        recipient = sim.node_ids[sim.rng.randrange(sim.cfg.n_nodes)]
        if recipient == self.node_id:
            recipient = sim.node_ids[(self.index + 1) % sim.cfg.n_nodes]
        if sim.cfg.tx_model is TxModel.ACCOUNT:
            amount = sim.rng.randint(1, 3)
            body = AccountBody(recipient, amount, self.wallet_nonce)
            self.wallet_nonce += 1
            return make_transaction(sim.scheme, self.secret, self.node_id, body)
        if not self.wallet_grants:
            return None
        outpoint, amount = self.wallet_grants.popleft()
        body = UtxoBody((outpoint,), (TxOutput(recipient, amount),))
        return make_transaction(sim.scheme, self.secret, self.node_id, body)

    def inject_tx(self) -> None:
        tx = self.build_payment()
        if tx is None:
            self.sim.report.txs_skipped += 1
            return
        self.sim.report.txs_injected += 1
        self.accept_tx(tx)
        self.sim.broadcast(self.index, TxGossip(tx))

    def accept_tx(self, tx: Transaction) -> None:
        if tx.tx_id not in self.mempool and len(self.mempool) < self.sim.cfg.mempool_cap:
            self.mempool[tx.tx_id] = tx

    # -- proposing -----------------------------------------------------------

    def on_propose_slot(self) -> None:
        if self.pending is not None:
            return
        req = self.make_request()
        if req is None:
            return
        best = self.state.best_score_at(req.height)
        if best is not None and best < block_score(req.block):
            return  # a known competitor already wins that height
        self.sim.report.proposals += 1
        self.pending = _Pending(req)
        self.sim.schedule_timeout(self.index, req.block_hash)
        self.sim.broadcast(self.index, WitnessReqMsg(req))

    def make_request(self) -> "WitnessRequest | None":
        # Selection doubles as mempool garbage collection: a transaction the
        # head state rejects as already-used or conflicting can never become
        # valid again (absent a deep reorg), so it is dropped for good.
        # Not-yet-valid ones (future nonce, missing funds) are kept.
        cfg = self.sim.cfg
        indices = self.state.head_indices_clone()
        taken: list[Transaction] = []
        dead: list[int] = []
        for tx in self.mempool.values():
            if tx.is_coinbase():
                dead.append(tx.tx_id)
                continue
            verdict = indices.validate_tx(tx, self.sim.scheme)
            if verdict is None:
                indices.apply_tx(tx)
                taken.append(tx)
                if len(taken) >= cfg.max_block_txs:
                    break
            elif verdict in _DEAD_TX:
                dead.append(tx.tx_id)
        for tx_id in dead:
            self.mempool.pop(tx_id, None)
        if len(taken) < cfg.chain.tx_count_min:
            return None
        return propose_block(
            self.node_id, self.state, taken, cfg.chain, max_txs=cfg.max_block_txs
        )

    # -- message handlers ------------------------------------------------------

    def on_witness_request(self, msg: WitnessReqMsg) -> None:
        result = sign_witness(
            self.secret,
            self.node_id,
            msg.req,
            self.state,
            self.sim.cfg.chain,
            self.witness_log,
        )
        if isinstance(result, WitnessSignature):
            proposer_idx = self.sim.index_of.get(msg.req.proposer)
            if proposer_idx is not None:
                self.sim.unicast(
                    self.index, proposer_idx, WitnessSigMsg(msg.req.block_hash, result)
                )

    def on_witness_sig(self, msg: WitnessSigMsg) -> None:
        pending = self.pending
        if pending is None or pending.req.block_hash != msg.block_hash:
            return
        pending.sigs[msg.sig.witness] = msg.sig
        cfg = self.sim.cfg
        if len(pending.sigs) < cfg.chain.witness_m:
            return
        parent_hash = pending.req.block.parent_hash
        block = mint_block(
            pending.req,
            list(pending.sigs.values()),
            cfg.chain,
            self.sim.scheme,
            hooks=self.sim.hooks,
            system_nonce=self.state.system_nonce_at(parent_hash),
        )
        if block is None:
            return
        self.pending = None
        self.sim.report.blocks_minted += 1
        self.note_minted(block)
        self.handle_block(block)

    def note_minted(self, block: Block) -> None:
        pass

    def on_block(self, msg: BlockGossip) -> None:
        self.handle_block(msg.block, pull_from=None)

    def handle_block(self, block: Block, pull_from: "int | None" = None) -> None:
        result = self.state.apply_block(block)
        if result.status is ApplyStatus.ORPHANED and pull_from is not None:
            self.sim.unicast(self.index, pull_from, PullReq(block.parent_hash, self.index))
        if result.stored or result.reapplied_orphans:
            if self.pending is not None and self.state.height >= self.pending.req.height:
                self.pending = None  # someone else won the height; move on
            if (
                result.status in (ApplyStatus.ACCEPTED, ApplyStatus.SWITCHED)
                and block.block_hash not in self.forwarded
            ):
                self.forwarded.add(block.block_hash)
                self.sim.broadcast(self.index, BlockGossip(block))
            self.emit_fork_wins()
            self.record_confirmations()

    def emit_fork_wins(self) -> None:
        for first, head in self.state.pop_fork_events():
            msg = ForkWinMsg(first, head, self.node_id)
            for _ in range(1 + self.sim.cfg.fork_win_extra):
                self.sim.report.fork_win_msgs += 1
                self.sim.broadcast(self.index, ForkWinGossip(msg))

    def on_fork_win(self, gossip: ForkWinGossip, from_idx: int) -> None:
        msg = gossip.msg
        if not self.state.has_block(msg.branch_head):
            self.sim.unicast(self.index, from_idx, PullReq(msg.branch_head, self.index))
            return
        first = self.state.blocks.get(msg.branch_first_block)
        if first is not None:
            kids = self.state.children.get(first.parent_hash, [])
            if len(kids) >= 2:
                self.state.resolve_fork(first.parent_hash)
                self.emit_fork_wins()
                self.record_confirmations()

    def on_pull_req(self, msg: PullReq) -> None:
        want = self.state.blocks.get(msg.want)
        if want is None:
            return
        chain: list[Block] = []
        cursor: "Block | None" = want
        for _ in range(8):
            if cursor is None or cursor.height == 0:
                break
            chain.append(cursor)
            cursor = self.state.blocks.get(cursor.parent_hash)
        if chain:
            self.sim.unicast(self.index, msg.asker, PullReply(tuple(reversed(chain))))

    def on_pull_reply(self, msg: PullReply) -> None:
        for block in msg.blocks:
            self.handle_block(block)

    def on_timeout(self, block_hash: int) -> None:
        if self.pending is not None and self.pending.req.block_hash == block_hash:
            self.pending = None
            self.sim.report.proposals_expired += 1

    # -- confirmation history ----------------------------------------------------

    def record_confirmations(self) -> None:
        state = self.state
        boundary = state.head.height - state.cfg.confirm_depth
        if boundary <= self.recorded_to:
            return
        for height in range(self.recorded_to + 1, boundary + 1):
            block_hash = state.main_by_height[height]
            prior = self.ever_confirmed.get(height)
            if prior is not None and prior != block_hash:
                self.self_conflicted = True
            self.ever_confirmed[height] = block_hash
        self.recorded_to = boundary

    def final_confirmed(self) -> dict[int, int]:
        final = dict(self.ever_confirmed)
        for offset, block_hash in enumerate(self.state.confirmed_prefix()):
            prior = final.get(offset)
            if prior is not None and prior != block_hash:
                self.self_conflicted = True
            final[offset] = block_hash
        return final


class AdversaryNode(HonestNode):
    """Colluding participant: endorses anything, ignores height logs."""

    is_adversary = True

    def on_witness_request(self, msg: WitnessReqMsg) -> None:
        req = msg.req
        if req.proposer == self.node_id:
            return
        try:
            eligible = is_eligible_witness(req.proposer, self.node_id, self.sim.cfg.chain)
        except ValueError:
            return
        if not eligible:
            return  # an ineligible signature would be dropped anyway
        sig = self.sim.scheme.sign(self.secret, witness_message(req.block))
        proposer_idx = self.sim.index_of.get(req.proposer)
        if proposer_idx is not None:
            self.sim.unicast(
                self.index,
                proposer_idx,
                WitnessSigMsg(req.block_hash, WitnessSignature(self.node_id, sig)),
            )


class DoubleSpendAdversary(AdversaryNode):
    """Emits conflicting transaction pairs, each half to half the network."""

    def on_propose_slot(self) -> None:
        self.emit_conflict_pair()
        super().on_propose_slot()

    def emit_conflict_pair(self) -> None:
        sim = self.sim
        others = [i for i in range(sim.cfg.n_nodes) if i != self.index]
        sim.rng.shuffle(others)
        half = len(others) // 2
        pair = self.build_conflict_pair()
        if pair is None:
            return
        tx_a, tx_b = pair
        sim.report.txs_injected += 2
        self.accept_tx(tx_a)
        for peer in others[:half]:
            sim.send(self.index, peer, TxGossip(tx_a))
        for peer in others[half:]:
            sim.send(self.index, peer, TxGossip(tx_b))

    def build_conflict_pair(self) -> "tuple[Transaction, Transaction] | None":
        sim = self.sim
        victims = [nid for nid in sim.node_ids if nid != self.node_id]
        to_a = victims[sim.rng.randrange(len(victims))]
        to_b = victims[sim.rng.randrange(len(victims))]
        if sim.cfg.tx_model is TxModel.ACCOUNT:
            nonce = self.wallet_nonce
            self.wallet_nonce += 1
            tx_a = make_transaction(
                sim.scheme, self.secret, self.node_id, AccountBody(to_a, 1, nonce)
            )
            tx_b = make_transaction(
                sim.scheme, self.secret, self.node_id, AccountBody(to_b, 2, nonce)
            )
            return tx_a, tx_b
        if not self.wallet_grants:
            return None
        outpoint, amount = self.wallet_grants.popleft()
        tx_a = make_transaction(
            sim.scheme,
            self.secret,
            self.node_id,
            UtxoBody((outpoint,), (TxOutput(to_a, amount),)),
        )
        tx_b = make_transaction(
            sim.scheme,
            self.secret,
            self.node_id,
            UtxoBody((outpoint,), (TxOutput(to_b, amount),)),
        )
        return tx_a, tx_b


class EquivocateAdversary(AdversaryNode):
    """Floats two different valid candidates for the same height at once."""

    def on_propose_slot(self) -> None:
        if self.pending is not None:
            return
        cfg = self.sim.cfg
        indices = self.state.head_indices_clone()
        valid: list[Transaction] = []
        for tx in self.mempool.values():
            if tx.is_coinbase():
                continue
            if indices.validate_tx(tx, self.sim.scheme) is None:
                indices.apply_tx(tx)
                valid.append(tx)
            if len(valid) > cfg.chain.tx_count_min:
                break
        need = cfg.chain.tx_count_min
        if len(valid) <= need:
            super().on_propose_slot()
            return
        head = self.state.head
        first = Block(head.block_hash, head.height + 1, self.node_id, tuple(valid[:need]))
        second = Block(head.block_hash, head.height + 1, self.node_id, tuple(valid[1 : need + 1]))
        self.sim.report.proposals += 2
        req_a, req_b = WitnessRequest(first), WitnessRequest(second)
        self.pending = _Pending(req_a)
        self.twin = _Pending(req_b)
        self.sim.schedule_timeout(self.index, req_a.block_hash)
        self.sim.broadcast(self.index, WitnessReqMsg(req_a))
        self.sim.broadcast(self.index, WitnessReqMsg(req_b))

    def on_witness_sig(self, msg: WitnessSigMsg) -> None:
        twin = getattr(self, "twin", None)
        if twin is not None and twin.req.block_hash == msg.block_hash:
            twin.sigs[msg.sig.witness] = msg.sig
            cfg = self.sim.cfg
            if len(twin.sigs) >= cfg.chain.witness_m:
                block = mint_block(
                    twin.req,
                    list(twin.sigs.values()),
                    cfg.chain,
                    self.sim.scheme,
                    hooks=self.sim.hooks,
                    system_nonce=self.state.system_nonce_at(twin.req.block.parent_hash),
                )
                if block is not None:
                    self.twin = None
                    self.sim.report.blocks_minted += 1
                    self.handle_block(block)
            return
        super().on_witness_sig(msg)


class InvalidPushAdversary(AdversaryNode):
    """Proposes blocks containing an invalid transaction; peers endorse blindly."""

    def on_propose_slot(self) -> None:
        if self.pending is not None:
            return
        sim = self.sim
        cfg = sim.cfg
        filler: list[Transaction] = []
        indices = self.state.head_indices_clone()
        for _ in range(cfg.chain.tx_count_min - 1):
            tx = self.build_payment()
            if tx is None or indices.validate_tx(tx, sim.scheme) is not None:
                continue
            indices.apply_tx(tx)
            filler.append(tx)
        bad = self.build_invalid_tx()
        txs = tuple(filler) + (bad,)
        if len(txs) < cfg.chain.tx_count_min:
            return
        head = self.state.head
        block = Block(head.block_hash, head.height + 1, self.node_id, txs)
        req = WitnessRequest(block)
        sim.report.proposals += 1
        self.pending = _Pending(req)
        sim.schedule_timeout(self.index, req.block_hash)
        sim.broadcast(self.index, WitnessReqMsg(req))

    def build_invalid_tx(self) -> Transaction:
        sim = self.sim
        recipient = sim.node_ids[(self.index + 1) % sim.cfg.n_nodes]
        if sim.cfg.tx_model is TxModel.ACCOUNT:
            body = AccountBody(recipient, 1, self.wallet_nonce + 9999)
            return make_transaction(sim.scheme, self.secret, self.node_id, body)
        from .core_types import Outpoint

        ghost = Outpoint(tx_id=self.sim.rng.getrandbits(256), index=0)
        body = UtxoBody((ghost,), (TxOutput(recipient, 1),))
        return make_transaction(sim.scheme, self.secret, self.node_id, body)

    def note_minted(self, block: Block) -> None:
        self.sim.report.invalid_minted += 1


_STRATEGY_CLASS = {
    Strategy.NONE: AdversaryNode,
    Strategy.DOUBLE_SPEND: DoubleSpendAdversary,
    Strategy.EQUIVOCATE: EquivocateAdversary,
    Strategy.INVALID_BLOCK_PUSH: InvalidPushAdversary,
}


# ---------------------------------------------------------------------------
# the simulator
# ---------------------------------------------------------------------------


class Simulator:
    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.scheme: SignatureScheme = get_scheme(cfg.scheme)
        self.report = SimReport(seed=cfg.seed, config=cfg.to_dict())
        self._heap: list = []
        self._seq = 0
        self.report.trace = []

        secrets = []
        node_ids = []
        for index in range(cfg.n_nodes):
            secret, node_id = self.scheme.keypair(
                b"sim-node" + enc_u64(cfg.seed & ((1 << 64) - 1)) + enc_u64(index)
            )
            secrets.append(secret)
            node_ids.append(node_id)
        self.node_ids = node_ids
        self.index_of = {nid: i for i, nid in enumerate(node_ids)}

        self.genesis_indices = self._build_alloc()
        self.snapshot_store: dict = {}
        self.verdict_cache: dict = {}
        self.hooks: MintHooks = NO_HOOKS
        self.coinbase_rule = None
        if cfg.rewards is not None and not cfg.rewards.is_zero():
            plugin = bitcoin_like_plugin(cfg.rewards, cfg.tx_model)
            self.hooks = register_hook(NO_HOOKS, "before", plugin)
            self.coinbase_rule = make_coinbase_rule(cfg.rewards, cfg.tx_model)

        n_adv = round(cfg.adversary_fraction * cfg.n_nodes)
        adv_indices = set(self.rng.sample(range(cfg.n_nodes), n_adv)) if n_adv else set()
        adv_cls = _STRATEGY_CLASS[cfg.adversary_strategy]
        self.nodes: list[HonestNode] = []
        for index in range(cfg.n_nodes):
            cls = adv_cls if index in adv_indices else HonestNode
            node = cls(self, index, secrets[index], node_ids[index])
            if cfg.tx_model is TxModel.UTXO:
                node.wallet_grants = deque(self._grants_for(node_ids[index]))
            self.nodes.append(node)
        self.report.honest_nodes = sum(1 for n in self.nodes if not n.is_adversary)

    # -- setup -------------------------------------------------------------

    def _build_alloc(self) -> TxIndices:
        cfg = self.cfg
        if cfg.tx_model is TxModel.ACCOUNT:
            return fund_accounts({nid: cfg.genesis_units for nid in self.node_ids})
        alloc = {nid: [cfg.utxo_unit] * cfg.genesis_outputs for nid in self.node_ids}
        return fund_utxos(alloc)

    def _grants_for(self, node_id: NodeId) -> list:
        grants = []
        for outpoint, out in self.genesis_indices.utxos.items():
            if out.owner == node_id:
                grants.append((outpoint, out.amount))
        return grants

    # -- scheduling -----------------------------------------------------------

    def _push(self, at: int, kind: int, payload) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (at, self._seq, kind, payload))

    def send(self, sender: int, target: int, message) -> None:
        """Point-to-point send under the same loss and latency model."""
        if self.rng.random() < self.cfg.delivery_ratio:
            delay = self.cfg.latency.sample(self.rng)
            self._push(self._now + delay, EV_DELIVER, (target, sender, message))

    def unicast(self, sender: int, target: int, message) -> None:
        self.send(sender, target, message)

    def broadcast(self, sender: int, message) -> None:
        for target in range(self.cfg.n_nodes):
            if target != sender:
                self.send(sender, target, message)

    def schedule_timeout(self, index: int, block_hash: int) -> None:
        self._push(self._now + self.cfg.proposal_timeout, EV_TIMEOUT, (index, block_hash))

    # -- run --------------------------------------------------------------------

    def run(self) -> SimReport:
        cfg = self.cfg
        self._now = 0
        whole = int(cfg.tx_rate)
        frac = cfg.tx_rate - whole
        for tick in range(cfg.duration):
            if tick % cfg.slot_spacing == 0:
                proposer = (tick // cfg.slot_spacing) % cfg.n_nodes
                self._push(tick, EV_PROPOSE, proposer)
            count = whole + (1 if self.rng.random() < frac else 0)
            for _ in range(count):
                self._push(tick, EV_INJECT, self.rng.randrange(cfg.n_nodes))
        processed = 0
        while self._heap:
            at, _, kind, payload = heapq.heappop(self._heap)
            self._now = at
            processed += 1
            if processed > 5_000_000:
                raise RuntimeError("event budget exceeded; runaway cascade")
            if kind == EV_DELIVER:
                target, sender, message = payload
                self._deliver(target, sender, message)
            elif kind == EV_INJECT:
                self.nodes[payload].inject_tx()
            elif kind == EV_PROPOSE:
                self.nodes[payload].on_propose_slot()
            elif kind == EV_TIMEOUT:
                index, block_hash = payload
                self.nodes[index].on_timeout(block_hash)
        self._finalize()
        return self.report

    def _deliver(self, target: int, sender: int, message) -> None:
        node = self.nodes[target]
        if isinstance(message, TxGossip):
            node.accept_tx(message.tx)
        elif isinstance(message, WitnessReqMsg):
            node.on_witness_request(message)
        elif isinstance(message, WitnessSigMsg):
            node.on_witness_sig(message)
        elif isinstance(message, BlockGossip):
            node.handle_block(message.block, pull_from=sender)
        elif isinstance(message, ForkWinGossip):
            node.on_fork_win(message, sender)
        elif isinstance(message, PullReq):
            node.on_pull_req(message)
        elif isinstance(message, PullReply):
            node.on_pull_reply(message)
        if self.cfg.trace:
            self.report.trace.append(
                SimEvent(self._now, type(message).__name__, f"{sender}->{target}")
            )

    # -- end-of-run accounting ------------------------------------------------------

    def _finalize(self) -> None:
        report = self.report
        honest = [n for n in self.nodes if not n.is_adversary]
        for node in self.nodes:
            report.per_node_head[str(node.index)] = f"{node.state.head.block_hash:064x}"
            report.switches += node.state.stats.switches
            report.orphans_expired += node.state.stats.orphans_expired
        if not honest:
            return
        finals = {node.index: node.final_confirmed() for node in honest}
        heights: set[int] = set()
        for record in finals.values():
            heights.update(record)
        majority: dict[int, int] = {}
        divergent = False
        for height in sorted(heights):
            votes = Counter(
                record[height] for record in finals.values() if height in record
            )
            if len(votes) > 1:
                divergent = True
            top = max(votes.values())
            majority[height] = min(h for h, v in votes.items() if v == top)
        report.hard_forks = 1 if divergent else 0
        for node in honest:
            record = finals[node.index]
            conflicted = node.self_conflicted or any(
                record.get(h) is not None
                and majority.get(h) is not None
                and record[h] != majority[h]
                for h in record
            )
            if conflicted:
                report.misled_events += 1
            if confirmed_conflicts(node.state):
                report.confirmed_conflict_nodes += 1
        # end-of-run confirmed prefixes must agree pairwise: every honest
        # prefix is a prefix of the longest one
        prefixes = sorted(
            (node.state.confirmed_prefix() for node in honest), key=len
        )
        longest = prefixes[-1]
        report.prefix_agreement = all(
            prefix == longest[: len(prefix)] for prefix in prefixes
        )
        confirmed_txs = 0
        block_lookup: dict[int, Block] = {}
        for node in honest:
            block_lookup.update(node.state.blocks)
        for height, block_hash in majority.items():
            if height == 0:
                continue
            block = block_lookup.get(block_hash)
            if block is not None:
                confirmed_txs += sum(1 for tx in block.transactions if not tx.is_coinbase())
        report.txs_confirmed = confirmed_txs
        report.max_height = max(node.state.head.height for node in honest)
        report.min_confirmed_height = min(
            max(record) if record else 0 for record in finals.values()
        )


def run_simulation(cfg: SimConfig) -> SimReport:
    """One deterministic run; identical config gives an identical report."""
    return Simulator(cfg).run()


# ---------------------------------------------------------------------------
# trial batches
# ---------------------------------------------------------------------------


@dataclass
class TrialsResult:
    trials: int
    base_seed: int
    totals: dict
    means: dict
    mins: dict
    maxs: dict
    hard_fork_runs: int
    hard_fork_ci: tuple[float, float]
    misled_nodes: int
    honest_node_runs: int
    misled_ci: tuple[float, float]
    rows: list

    def to_json(self) -> str:
        payload = dict(self.__dict__)
        payload["hard_fork_ci"] = list(self.hard_fork_ci)
        payload["misled_ci"] = list(self.misled_ci)
        return json.dumps(payload, indent=2, sort_keys=True)

    def summary_line(self) -> str:
        return (
            f"trials={self.trials} hard_forks={self.totals['hard_forks']} "
            f"misled_events={self.totals['misled_events']} "
            f"blocks_minted={self.totals['blocks_minted']}"
        )


def _run_trial(args: tuple) -> SimReport:
    cfg, seed = args
    return run_simulation(replace(cfg, seed=seed))


def run_trials(cfg: SimConfig, trials: int, jobs: int = 1) -> TrialsResult:
    """Independent seeded runs: trial i uses seed base+i; order-independent."""
    if trials < 1:
        raise SimConfigError("trials", "must be >= 1")
    cfg.validate()
    seeds = [cfg.seed + i for i in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_trial, [(cfg, s) for s in seeds], chunksize=8))
    else:
        reports = [_run_trial((cfg, s)) for s in seeds]
    totals = {name: 0 for name in COUNTER_FIELDS}
    mins = {name: None for name in COUNTER_FIELDS}
    maxs = {name: None for name in COUNTER_FIELDS}
    rows = []
    honest_total = 0
    for rep in reports:
        honest_total += rep.honest_nodes
        row = {"seed": rep.seed}
        for name in COUNTER_FIELDS:
            value = getattr(rep, name)
            row[name] = value
            totals[name] += value
            mins[name] = value if mins[name] is None else min(mins[name], value)
            maxs[name] = value if maxs[name] is None else max(maxs[name], value)
        rows.append(row)
    means = {name: totals[name] / trials for name in COUNTER_FIELDS}
    fork_runs = sum(1 for rep in reports if rep.hard_forks > 0)
    return TrialsResult(
        trials=trials,
        base_seed=cfg.seed,
        totals=totals,
        means=means,
        mins=mins,
        maxs=maxs,
        hard_fork_runs=fork_runs,
        hard_fork_ci=wilson_interval(fork_runs, trials),
        misled_nodes=totals["misled_events"],
        honest_node_runs=max(honest_total, 1),
        misled_ci=wilson_interval(totals["misled_events"], max(honest_total, 1)),
        rows=rows,
    )


def write_trials_csv(result: TrialsResult, path: str) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", *COUNTER_FIELDS])
        for row in result.rows:
            writer.writerow([row["seed"], *(row[name] for name in COUNTER_FIELDS)])


# ---------------------------------------------------------------------------
# miss-model Monte Carlo (abstract delivery model behind the misled bound)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class MissModelResult:
    frequency: float
    misled: int
    trials: int
    exponent: int


def run_miss_model(
    params: SafetyParams, trials: int, seed: int = 0, chunk: int = 50_000
) -> MissModelResult:
    """Draw K Bernoulli deliveries per trial; misled iff all K are lost.

    This is the executable form of the delivery-independence assumption the
    closed formula rests on, kept separate from it so the two can be checked
    against each other.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    k = misled_exponent(params.m, params.n_c, params.l)
    if params.r == 1.0:
        return MissModelResult(0.0, 0, trials, k)
    rng = np.random.default_rng(seed)
    misled = 0
    remaining = trials
    while remaining > 0:
        n = min(chunk, remaining)
        draws = rng.random((n, k))
        misled += int((draws >= params.r).all(axis=1).sum())
        remaining -= n
    return MissModelResult(misled / trials, misled, trials, k)


# ---------------------------------------------------------------------------
# witness-corruption Monte Carlo (real proposal/refusal/signing path)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CorruptionResult:
    witnessed_rate: float
    witnessed: int
    attempts: int
    adversarial_slot_rate: float
    analytic: float
    m: int
    q: float
    n_keys: int


def witness_corruption_trials(
    attempts: int,
    q: float,
    m: int,
    n_keys: int = 200,
    seed: int = 0,
) -> CorruptionResult:
    """How often an invalid block gathers m signatures under collusion.

    A fixed adversarial proposer floats a genuinely invalid block (bad nonce).
    Each attempt samples m distinct witnesses uniformly from the eligible
    set; each sampled witness is adversarial with probability q (nodes are
    compromised independently). Honest witnesses run the real refusal path
    and never sign; adversarial ones sign blindly. The block counts as
    witnessed only when the real minting path accepts the certificate.
    """
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    if m < 1 or m >= n_keys - 1:
        raise ValueError("need 1 <= m < n_keys - 1")
    rng = random.Random(seed)
    scheme = get_scheme("stub")
    keys = [scheme.keypair(b"corruption" + enc_u64(i)) for i in range(n_keys)]
    proposer_secret, proposer = keys[0]
    cfg = ChainConfig(tx_count_min=1, witness_m=m, confirm_depth=3)
    state = ChainState(cfg, scheme, fund_accounts({proposer: 10**9}))
    # a structurally fine block whose transaction can never validate: the
    # nonce is far in the future for the sender's account
    recipient = keys[1][1]
    bad_tx = make_transaction(
        scheme, proposer_secret, proposer, AccountBody(recipient, 1, 7777)
    )
    block = Block(state.genesis.block_hash, 1, proposer, (bad_tx,))
    req = WitnessRequest(block)
    eligible = [
        i
        for i in range(1, n_keys)
        if is_eligible_witness(proposer, keys[i][1], cfg)
    ]
    if len(eligible) < m:
        raise ValueError("eligible set smaller than m")
    message = witness_message(block)
    witnessed = 0
    adversarial_slots = 0
    for _ in range(attempts):
        chosen = rng.sample(eligible, m)
        sigs = []
        complete = True
        for idx in chosen:
            secret, wid = keys[idx]
            if rng.random() < q:
                adversarial_slots += 1
                sigs.append(WitnessSignature(wid, scheme.sign(secret, message)))
            else:
                outcome = sign_witness(secret, wid, req, state, cfg, {})
                if not isinstance(outcome, Refusal):
                    raise AssertionError("honest witness endorsed an invalid block")
                complete = False
        if complete and mint_block(req, sigs, cfg, scheme) is not None:
            witnessed += 1
    return CorruptionResult(
        witnessed_rate=witnessed / attempts,
        witnessed=witnessed,
        attempts=attempts,
        adversarial_slot_rate=adversarial_slots / (attempts * m),
        analytic=q**m,
        m=m,
        q=q,
        n_keys=n_keys,
    )
