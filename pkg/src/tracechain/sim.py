"""Desk-scale replication: one proposer seals blocks, replicas verify and
apply them independently, convergence is judged by digest equality.

Delivery is FIFO per destination. Which destination is served next is drawn
from a seeded RNG, as is the byte flipped in a tampered delivery, so a seed
fixes the whole schedule.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, Iterable, List, Mapping, Optional, Tuple

from .ledger import Block, Chain, decode_block, encode_block, state_digest


@dataclass
class SimNode:
    node_id: int
    chain: Chain = field(default_factory=Chain)
    last_verified: int = -1
    diverged: bool = False
    quarantined: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def tip_state_digest(self) -> bytes:
        return state_digest(self.chain.tip_state)


@dataclass(frozen=True)
class Delivery:
    destination: int
    height: int
    tampered: bool
    applied: bool
    reason: str = ""


@dataclass
class SimNetwork:
    nodes: List[SimNode]
    seed: int
    in_flight: Dict[int, Deque[Tuple[int, bytes, bool]]] = field(default_factory=dict)
    deliveries: int = 0

    def __post_init__(self) -> None:
        self.rng = random.Random(self.seed)
        for node in self.nodes[1:]:
            self.in_flight.setdefault(node.node_id, deque())

    @property
    def proposer(self) -> SimNode:
        return self.nodes[0]

    def pending_deliveries(self) -> int:
        return sum(len(q) for q in self.in_flight.values())


def new_network(n: int, seed: int) -> SimNetwork:
    if n < 1:
        raise ValueError("a network needs at least one node")
    return SimNetwork([SimNode(i) for i in range(n)], seed)


def client_submit(net: SimNetwork, op: str, params: Mapping[str, Any], timestamp: int):
    """Submit to the proposer. Rejections propagate and nothing is broadcast."""
    return net.proposer.chain.submit(op, params, timestamp)


def seal_and_broadcast(net: SimNetwork, timestamp: int, tamper: Iterable[int] = ()) -> Block:
    """Seal the proposer's pending transactions and queue the encoded block
    for every replica. Deliveries to node ids in ``tamper`` get one byte
    flipped in flight."""
    tamper = set(tamper)
    block = net.proposer.chain.seal_block(timestamp)
    net.proposer.last_verified = block.height
    payload = encode_block(block).encode("utf-8")
    for node in net.nodes[1:]:
        net.in_flight[node.node_id].append((block.height, payload, node.node_id in tamper))
    return block


def _flip_byte(rng: random.Random, payload: bytes) -> bytes:
    data = bytearray(payload)
    pos = rng.randrange(len(data))
    data[pos] ^= rng.randrange(1, 256)
    return bytes(data)


def deliver_next(net: SimNetwork) -> Optional[Delivery]:
    """Deliver one in-flight block; ``None`` when the network is idle."""
    ready = sorted(d for d, q in net.in_flight.items() if q)
    if not ready:
        return None
    dest = net.rng.choice(ready)
    height, payload, tampered = net.in_flight[dest].popleft()
    if tampered:
        payload = _flip_byte(net.rng, payload)
    node = net.nodes[dest]
    net.deliveries += 1
    try:
        block = decode_block(payload.decode("utf-8"))
        node.chain.append_block(block)
    except (ValueError, KeyError, TypeError) as exc:
        node.quarantined.append((height, str(exc)))
        node.diverged = True
        return Delivery(dest, height, tampered, False, str(exc))
    node.last_verified = block.height
    return Delivery(dest, height, tampered, True)


def run_to_quiescence(net: SimNetwork) -> int:
    steps = 0
    while deliver_next(net) is not None:
        steps += 1
    return steps


def check_convergence(net: SimNetwork) -> bool:
    """All non-diverged nodes share the tip state digest and tip block digest."""
    live = [n for n in net.nodes if not n.diverged]
    if len(live) <= 1:
        return True
    first = live[0]
    return all(
        n.tip_state_digest == first.tip_state_digest
        and n.chain.tip_digest == first.chain.tip_digest
        for n in live[1:]
    )


def random_workload(rng: random.Random, next_id: int, available: List[int],
                    count: int) -> Tuple[List[Tuple[str, Dict[str, Any]]], int]:
    """Generate ``count`` guard-valid transactions. ``available`` is the
    caller's list of unconsumed TRU ids and is updated in place."""
    txs: List[Tuple[str, Dict[str, Any]]] = []
    for _ in range(count):
        if available and rng.random() < 0.6:
            k = rng.randint(1, min(3, len(available)))
            inputs = rng.sample(available, k)
            for t in inputs:
                available.remove(t)
            outputs = list(range(next_id + 1, next_id + 1 + rng.randint(1, 2)))
            txs.append(("activity", {
                "id": next_id, "name": f"step{next_id}", "inputs": inputs,
                "outputs": outputs,
                "mode": "consumeInputs" if rng.random() < 0.8 else "useInputs",
            }))
            available.extend(outputs)
            next_id = outputs[-1] + 1
        else:
            txs.append(("genesis", {"id": next_id}))
            available.append(next_id)
            next_id += 1
    return txs, next_id


def run_simulation(nodes: int, blocks: int, seed: int, tamper: bool = False,
                   start_ms: int = 1_500_000_000_000) -> SimNetwork:
    """Drive a network through ``blocks`` sealed blocks of random valid
    transactions, interleaving deliveries, then drain the queues. With
    ``tamper``, one seeded replica delivery is corrupted."""
    net = new_network(nodes, seed)
    workload_rng = random.Random(seed ^ 0x5EED)
    victim = None
    if tamper and nodes > 1 and blocks > 0:
        # separate stream so tampering leaves the workload itself unchanged
        pick = random.Random(seed ^ 0x7A3F)
        victim = (pick.randrange(blocks), pick.randrange(1, nodes))
    next_id, available = 1, []
    ts = start_ms
    for height in range(blocks):
        txs, next_id = random_workload(workload_rng, next_id, available,
                                       workload_rng.randint(1, 4))
        for op, params in txs:
            ts += 1
            client_submit(net, op, params, ts)
        ts += 1
        hit = [victim[1]] if victim and victim[0] == height else []
        seal_and_broadcast(net, ts, tamper=hit)
        for _ in range(workload_rng.randint(0, nodes)):
            deliver_next(net)
    run_to_quiescence(net)
    return net


def summary(net: SimNetwork) -> str:
    lines = [
        f"nodes: {len(net.nodes)}",
        f"blocks: {net.proposer.chain.height}",
        f"deliveries: {net.deliveries}",
        f"divergences: {sum(n.diverged for n in net.nodes)}",
    ]
    for node in net.nodes:
        status = "quarantined" if node.diverged else "ok"
        lines.append(
            f"node {node.node_id}: height {node.chain.height} "
            f"state {node.tip_state_digest.hex()[:16]} {status}"
        )
    lines.append(f"converged: {'true' if check_convergence(net) else 'false'}")
    return "\n".join(lines) + "\n"
