"""Dynamic-trajectory HMC with U-turn termination.

Trajectories grow by doubling: each round integrates 2^depth leapfrog steps
in a random direction, forming a balanced binary tree whose leaves are
phase-space points.  The next state is drawn from the leaves by multinomial
sampling weighted by exp(-H), which preserves detailed balance.  Growth
stops when the trajectory starts turning back on itself or a subtree
diverges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from .hmc import PhaseState, StepInfo, hamiltonian, leapfrog


def u_turn_scalar(span, velocity):
    """Time derivative of half the squared end-to-end distance."""
    return float(np.dot(span, velocity))


def _no_u_turn(minus, plus, mass):
    span = plus.position - minus.position
    return (u_turn_scalar(span, mass.inv_mul(minus.momentum)) > 0.0
            and u_turn_scalar(span, mass.inv_mul(plus.momentum)) > 0.0)


@dataclass
class _Tree:
    minus: PhaseState
    plus: PhaseState
    proposal: PhaseState
    log_weight: float
    accept_sum: float
    n_leaves: int
    valid: bool
    divergent: bool


def _leaf(state, direction, config, mass, target, energy_0):
    step = direction * config.step_size
    try:
        new = leapfrog(state, 1, step, mass, target)
    except DivergenceError:
        return _Tree(state, state, state, -math.inf, 0.0, 1, False, True)
    energy_error = hamiltonian(new, mass) - energy_0
    if energy_error > config.divergence_threshold:
        return _Tree(new, new, new, -math.inf, 0.0, 1, False, True)
    accept = math.exp(min(0.0, -energy_error))
    return _Tree(new, new, new, -energy_error, accept, 1, True, False)


def _build_tree(state, direction, depth, config, mass, target, rng, energy_0):
    if depth == 0:
        return _leaf(state, direction, config, mass, target, energy_0)
    first = _build_tree(state, direction, depth - 1, config, mass, target,
                        rng, energy_0)
    if not first.valid:
        return first
    edge = first.plus if direction == 1 else first.minus
    second = _build_tree(edge, direction, depth - 1, config, mass, target,
                         rng, energy_0)
    accept_sum = first.accept_sum + second.accept_sum
    n_leaves = first.n_leaves + second.n_leaves
    if not second.valid:
        return _Tree(first.minus, first.plus, first.proposal, first.log_weight,
                     accept_sum, n_leaves, False, second.divergent)
    minus = first.minus if direction == 1 else second.minus
    plus = second.plus if direction == 1 else first.plus
    log_weight = np.logaddexp(first.log_weight, second.log_weight)
    proposal = first.proposal
    if math.log(rng.uniform()) < second.log_weight - log_weight:
        proposal = second.proposal
    valid = _no_u_turn(minus, plus, mass)
    return _Tree(minus, plus, proposal, log_weight, accept_sum, n_leaves,
                 valid, False)


def nuts_step(state, config, mass, target, rng):
    """One dynamic-trajectory transition; returns (state, StepInfo)."""
    momentum = mass.sample(rng, len(state.position))
    state = state.with_momentum(momentum)
    energy_0 = hamiltonian(state, mass)
    # accept statistics average over new leaves only, hence the 0/0 start
    tree = _Tree(state, state, state, 0.0, 0.0, 0, True, False)
    proposal = state
    divergent = False
    depth = 0
    while depth < config.max_tree_depth:
        direction = 1 if rng.uniform() < 0.5 else -1
        edge = tree.plus if direction == 1 else tree.minus
        sub = _build_tree(edge, direction, depth, config, mass, target, rng,
                          energy_0)
        tree.accept_sum += sub.accept_sum
        tree.n_leaves += sub.n_leaves
        if not sub.valid:
            divergent = sub.divergent
            break
        total = np.logaddexp(tree.log_weight, sub.log_weight)
        if math.log(rng.uniform()) < sub.log_weight - total:
            proposal = sub.proposal
        tree.log_weight = total
        tree.minus = sub.minus if direction == -1 else tree.minus
        tree.plus = sub.plus if direction == 1 else tree.plus
        depth += 1
        if not _no_u_turn(tree.minus, tree.plus, mass):
            break
    moved = proposal is not state
    energy_error = hamiltonian(proposal, mass) - energy_0
    accept_prob = tree.accept_sum / tree.n_leaves if tree.n_leaves else 0.0
    info = StepInfo(accepted=moved,
                    accept_prob=accept_prob,
                    energy_error=energy_error,
                    divergent=divergent,
                    tree_depth=depth)
    return proposal, info
