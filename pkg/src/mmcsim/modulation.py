"""Per-phase switching decision: targets, sorted selection, and both
submodule orderings (the conventional voltage sort and the
switching-constrained cascade)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (
    ArmState,
    PhaseLegState,
    SwitchDecision,
    SystemParams,
    anticipate_capacitor_voltages,
    arm_currents,
)

ALGORITHMS = ("v1f2", "v1fc")


@dataclass(frozen=True)
class ArmTargets:
    """Ideal next-step arm voltages for exact tracking and zero
    circulating-current residual."""

    v_up_target: float
    v_low_target: float


@dataclass(frozen=True)
class SortedArm:
    """Result of a sorting pass over one arm.

    ``order[m]`` is the original submodule index placed at position m.
    The parallel tuples give, per position along the final order: the
    anticipated capacitor voltage, the cumulative count of turn-on
    events over the prefix ending there, and the switching-budget
    penalty max(0, count - budget) of that prefix.
    """

    order: tuple[int, ...]
    v_next: tuple[float, ...]
    switch_counts: tuple[int, ...]
    penalties: tuple[int, ...]


@dataclass(frozen=True)
class SelectionResult:
    """Insertion counts chosen for a phase leg and their objective value.

    ``decision`` is populated by ``modulate_phase``, which knows the sort
    permutations; the bare selectors leave it None.
    """

    m_up: int
    m_low: int
    f_value: float
    decision: Optional[SwitchDecision] = None


def compute_targets(
    params: SystemParams,
    i_ref: float,
    i_now: float,
    i_circ_now: float,
    v_grid_now: float,
) -> ArmTargets:
    """Arm-voltage targets that would track ``i_ref`` exactly and drive the
    circulating current to zero in one step."""
    common = params.v_dc / 2.0 + (params.l_arm / params.t_s) * i_circ_now
    drive = params.z_step * i_ref + v_grid_now - (params.l_ac / params.t_s) * i_now
    return ArmTargets(common - drive, common + drive)


def objective_f(
    params: SystemParams,
    targets: ArmTargets,
    v_up_next: float,
    v_low_next: float,
) -> float:
    """Weighted selection objective for one candidate pair of arm voltages.

    The two terms equal w_track * |AC tracking error| and
    w_circ * |next circulating current| expressed in amperes.
    """
    d_up = targets.v_up_target - v_up_next
    d_low = targets.v_low_target - v_low_next
    return (params.w_track / (2.0 * params.z_step)) * abs(d_low - d_up) + (
        params.w_circ * params.t_s / (2.0 * params.l_arm)
    ) * abs(d_low + d_up)


def _anticipated_all_on(arm: ArmState, i_arm: float, params: SystemParams) -> list[float]:
    # sorting keys assume hypothetical insertion of every SM; the increment
    # is uniform across an arm, so measured-voltage order is preserved
    return anticipate_capacitor_voltages(arm, i_arm, [1] * params.n, params)


def _turn_on_keys(order: Sequence[int], u_now: Sequence[int], n_sw_max: int):
    # published per-position keys, recomputed on the final order
    counts: list[int] = []
    penalties: list[int] = []
    events = 0
    for j in order:
        events += 1 - u_now[j]
        counts.append(events)
        penalties.append(max(0, events - n_sw_max))
    return tuple(counts), tuple(penalties)


def sort_v1f2(arm: ArmState, i_arm: float, params: SystemParams) -> SortedArm:
    """Conventional balancing order: anticipated capacitor voltage only.

    Ascending while the arm current charges (i_arm >= 0), descending
    otherwise, ties keeping index order.  Penalties are all zero.
    """
    v_next = _anticipated_all_on(arm, i_arm, params)
    order = sorted(range(params.n), key=v_next.__getitem__, reverse=i_arm < 0)
    counts, _ = _turn_on_keys(order, arm.u, params.n)
    return SortedArm(
        order=tuple(order),
        v_next=tuple(v_next[j] for j in order),
        switch_counts=counts,
        penalties=(0,) * params.n,
    )


def sort_v1fc(
    arm: ArmState,
    i_arm: float,
    n_sw_max: int,
    params: SystemParams,
) -> SortedArm:
    """Switching-constrained balancing order (cascaded stable sorts).

    Passes: (a) currently-inserted SMs first, (b) anticipated capacitor
    voltage (ascending when charging), (c) stable re-sort by the
    switching-budget penalty.  The penalty key lives on each submodule:
    an already-ON SM switches for free and carries zero penalty, while
    the k-th OFF SM along the voltage order carries max(0, k - budget).
    Attaching the prefix-cumulative count to positions instead would be
    non-decreasing along the order and the final stable sort would never
    move anything, voiding the constraint.

    With ``n_sw_max == n`` every penalty is zero and the result collapses
    to the plain voltage order of ``sort_v1f2``.
    """
    n = params.n
    if not 0 <= n_sw_max <= n:
        raise ValueError(f"n_sw_max must be in [0, {n}], got {n_sw_max}")
    u_now = arm.u
    v_next = _anticipated_all_on(arm, i_arm, params)

    order = sorted(range(n), key=lambda j: -u_now[j])
    order = sorted(order, key=v_next.__getitem__, reverse=i_arm < 0)

    penalty = [0] * n
    events = 0
    for j in order:
        if not u_now[j]:
            events += 1
            if events > n_sw_max:
                penalty[j] = events - n_sw_max
    order.sort(key=penalty.__getitem__)

    counts, penalties = _turn_on_keys(order, u_now, n_sw_max)
    return SortedArm(
        order=tuple(order),
        v_next=tuple(v_next[j] for j in order),
        switch_counts=counts,
        penalties=penalties,
    )


def cumulative_sums(sorted_arm: SortedArm, v_c_next: Sequence[float]) -> list[float]:
    """Running sums [0, s1, ..., sn] of anticipated capacitor voltages taken
    in the sorted order; entry k is the arm voltage obtained by inserting
    the first k submodules."""
    sums = [0.0]
    acc = 0.0
    for j in sorted_arm.order:
        acc += v_c_next[j]
        sums.append(acc)
    return sums


def _strictly_increasing(values: Sequence[float]) -> bool:
    return all(values[k] < values[k + 1] for k in range(len(values) - 1))


def _bracket(cumsum: Sequence[float], target: float) -> int:
    # index k with cumsum[k] <= target < cumsum[k+1]; target == cumsum[-1]
    # lands in the top bracket
    for k in range(len(cumsum) - 1):
        if cumsum[k] <= target < cumsum[k + 1]:
            return k
    return len(cumsum) - 2


def brute_force_select(
    alpha: Sequence[float],
    beta: Sequence[float],
    targets: ArmTargets,
    params: SystemParams,
) -> SelectionResult:
    """Exhaustive reference selection over every (m_up, m_low) pair.

    Kept as the oracle the shortcut selector is tested against; ties are
    broken by smaller objective, then smaller m_up, then smaller m_low.
    """
    best: tuple[float, int, int] | None = None
    for m_up, a in enumerate(alpha):
        for m_low, b in enumerate(beta):
            key = (objective_f(params, targets, a, b), m_up, m_low)
            if best is None or key < best:
                best = key
    assert best is not None
    return SelectionResult(m_up=best[1], m_low=best[2], f_value=best[0])


def select_optimal(
    alpha: Sequence[float],
    beta: Sequence[float],
    targets: ArmTargets,
    params: SystemParams,
) -> SelectionResult:
    """Minimize the selection objective over the cumulative-sum grids.

    For targets inside the representable range on strictly increasing
    sums it suffices to evaluate the four bracket combinations around
    each target.  Targets outside the range, sums that are not strictly
    monotone (possible with zero or negative anticipated voltages in
    deeply distorted states), and the degenerate duplicates they bring
    all fall back to the full scan, so the result matches
    ``brute_force_select`` exactly, tie-breaks included.
    """
    t_up = targets.v_up_target
    t_low = targets.v_low_target
    interior = (
        _strictly_increasing(alpha)
        and _strictly_increasing(beta)
        and alpha[0] <= t_up <= alpha[-1]
        and beta[0] <= t_low <= beta[-1]
    )
    if not interior:
        return brute_force_select(alpha, beta, targets, params)

    i = _bracket(alpha, t_up)
    j = _bracket(beta, t_low)
    best: tuple[float, int, int] | None = None
    for m_up in (i, i + 1):
        for m_low in (j, j + 1):
            key = (objective_f(params, targets, alpha[m_up], beta[m_low]), m_up, m_low)
            if best is None or key < best:
                best = key
    assert best is not None
    return SelectionResult(m_up=best[1], m_low=best[2], f_value=best[0])


def modulate_phase(
    state: PhaseLegState,
    i_ref: float,
    n_sw_max: int,
    algorithm: str,
    params: SystemParams,
    i_circ_nominal: float = 0.0,
) -> SelectionResult:
    """One full modulation pass for one phase leg.

    Anticipates capacitor voltages, sorts each arm with the chosen
    strategy, builds cumulative sums, selects insertion counts against
    the voltage targets, and maps the chosen prefixes back to original
    submodule indices.

    ``i_circ_nominal`` is subtracted from the measured circulating
    current before the targets are formed, steering the common-mode
    current toward that value instead of zero.  The scenario layer uses
    it to route the average DC-side power of the operating point; the
    default of zero leaves the textbook behaviour untouched.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")
    n = params.n
    i_up, i_low = arm_currents(state.i_ac, state.i_circ)

    targets = compute_targets(
        params, i_ref, state.i_ac, state.i_circ - i_circ_nominal, state.v_grid
    )

    if algorithm == "v1f2":
        up = sort_v1f2(state.upper, i_up, params)
        low = sort_v1f2(state.lower, i_low, params)
    else:
        up = sort_v1fc(state.upper, i_up, n_sw_max, params)
        low = sort_v1fc(state.lower, i_low, n_sw_max, params)

    alpha = cumulative_sums(up, _anticipated_all_on(state.upper, i_up, params))
    beta = cumulative_sums(low, _anticipated_all_on(state.lower, i_low, params))
    chosen = select_optimal(alpha, beta, targets, params)

    statuses = [0] * (2 * n)
    for m in range(chosen.m_up):
        statuses[up.order[m]] = 1
    for m in range(chosen.m_low):
        statuses[n + low.order[m]] = 1
    return SelectionResult(
        m_up=chosen.m_up,
        m_low=chosen.m_low,
        f_value=chosen.f_value,
        decision=SwitchDecision(tuple(statuses)),
    )
