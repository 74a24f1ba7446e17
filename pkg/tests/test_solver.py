import dataclasses
import math
import random

import numpy as np
import pytest

from failure.independence import build_independence_matrix
from metrics.report import capacity_reduction
from placement.model import PlacementModelBuilder
from placement.solution import check_solution
from solver.branch_and_bound import lexicographic_weight, solve_exact
from solver.greedy import solve_greedy
from solver.oracle import brute_force_oracle
from solver.outcome import OracleGuardError, SolverError, SolverTimeoutError, SolveStatus
from tests.conftest import all_dependent, make_instance, random_topology
from topology.loader import TopologyLoader


def _exact(instance, **kwargs):
    return solve_exact(PlacementModelBuilder(instance).build(), **kwargs)


def _oracle(instance):
    max_c = max(instance.bounds.c.values(), default=0)
    return brute_force_oracle(instance.topology, instance.matrix, instance.paths, instance.params, max_c)


def _violations(outcome, instance):
    return check_solution(outcome.solution, instance.topology, instance.matrix, instance.paths, instance.params)


def test_triangle_of_independent_gateways(triangle):
    instance = make_instance(triangle, alpha=0.05)
    outcome = _exact(instance)
    assert outcome.status == SolveStatus.OPTIMAL
    assert outcome.objective == 3
    assert outcome.solution.total_primary == 6
    assert outcome.solution.total_backup == 3
    assert outcome.solution.active_sites == 3
    assert _violations(outcome, instance) == []


def test_dependent_sites_get_no_placement(triangle):
    instance = make_instance(triangle, alpha=0.05, matrix=all_dependent(triangle))
    outcome = _exact(instance)
    assert outcome.objective == 0
    assert outcome.solution.replications() == []


def test_ties_on_objective_prefer_more_primaries(two_site):
    outcome = _exact(make_instance(two_site, alpha=0.1))
    assert outcome.objective == 0
    assert outcome.solution.x == {"A": 2, "B": 2}
    assert outcome.solution.b == {"A": 2, "B": 2}
    assert outcome.solution.r == {("A", "B"): 480, ("B", "A"): 480}


def test_bridge_cannot_replicate_when_reserving_secondary_paths(two_site):
    outcome = _exact(make_instance(two_site, alpha=0.1, gamma=1))
    assert outcome.solution.total_primary == 0
    assert outcome.solution.total_backup == 0


def test_links_too_small_for_one_server(two_site):
    outcome = _exact(make_instance(two_site, alpha=0.04))
    assert outcome.solution.replications() == []
    assert outcome.solution.active_sites == 0


def test_topology_without_links():
    topology = TopologyLoader().from_dict({
        "name": "solo", "sites": [{"id": "A", "gateway": True}], "links": [],
    })
    instance = make_instance(topology, alpha=0.05)
    assert _exact(instance).objective == 0
    assert _oracle(instance).objective == 0
    assert solve_greedy(PlacementModelBuilder(instance).build()).objective == 0


def test_weight_dominates_the_primary_tiebreak(chain):
    model = PlacementModelBuilder(make_instance(chain, alpha=0.05)).build()
    assert lexicographic_weight(model) == 1 + 8


def test_unbounded_variables_are_rejected(triangle):
    model = PlacementModelBuilder(make_instance(triangle, alpha=0.05)).build()
    variables = tuple(
        dataclasses.replace(var, upper=math.inf) if var.family == "r" else var for var in model.variables
    )
    with pytest.raises(SolverError):
        solve_exact(dataclasses.replace(model, variables=variables))


def test_expired_time_limit_without_incumbent(triangle):
    with pytest.raises(SolverTimeoutError):
        _exact(make_instance(triangle, alpha=0.05), time_limit=-1)


def test_exact_search_is_deterministic(figure1):
    instance = make_instance(figure1, alpha=0.05, gamma=1)
    first = _exact(instance)
    second = _exact(instance)
    assert first.solution == second.solution
    assert first.nodes_explored == second.nodes_explored


def test_more_capacity_never_lowers_the_placement(figure1):
    outcomes = [_exact(make_instance(figure1, alpha=alpha)) for alpha in (0.03, 0.05, 0.1)]
    objectives = [outcome.objective for outcome in outcomes]
    primaries = [outcome.solution.total_primary for outcome in outcomes]
    assert objectives == [7, 14, 28]
    assert primaries == sorted(primaries)


def test_reserving_secondary_paths_never_helps(figure1):
    free = _exact(make_instance(figure1, alpha=0.05, gamma=0))
    reserved = _exact(make_instance(figure1, alpha=0.05, gamma=1))
    assert reserved.objective <= free.objective
    assert reserved.solution.total_primary <= free.solution.total_primary


GRID_ALPHAS = (0.05, 0.10, 0.15)
GRID_LWORST = (1.3, 2.6, 5.2)


def _assert_backups_are_tight(solution, topology):
    for site in topology.site_ids:
        incoming = [count for (_, j), count in solution.c.items() if j == site]
        assert solution.b.get(site, 0) == max(incoming, default=0), site


@pytest.mark.parametrize("name", ["two_site", "triangle", "chain", "ring4", "figure1", "bowtie", "rnp_sample"])
def test_placement_grows_with_capacity_and_latency_budget(request, name):
    topology = request.getfixturevalue(name)
    primary = {}
    objective = {}
    for alpha in GRID_ALPHAS:
        for lworst_ms in GRID_LWORST:
            for gamma in (0, 1):
                outcome = _exact(make_instance(topology, alpha=alpha, lworst_ms=lworst_ms, gamma=gamma))
                assert outcome.status == SolveStatus.OPTIMAL
                _assert_backups_are_tight(outcome.solution, topology)
                primary[alpha, lworst_ms, gamma] = outcome.solution.total_primary
                objective[alpha, lworst_ms, gamma] = outcome.objective

    for gamma in (0, 1):
        for lworst_ms in GRID_LWORST:
            by_alpha = [primary[alpha, lworst_ms, gamma] for alpha in GRID_ALPHAS]
            assert by_alpha == sorted(by_alpha)
        for alpha in GRID_ALPHAS:
            by_lworst = [primary[alpha, lworst_ms, gamma] for lworst_ms in GRID_LWORST]
            assert by_lworst == sorted(by_lworst)

    for alpha in GRID_ALPHAS:
        for lworst_ms in GRID_LWORST:
            protected, unprotected = primary[alpha, lworst_ms, 1], primary[alpha, lworst_ms, 0]
            assert protected <= unprotected
            assert objective[alpha, lworst_ms, 1] <= objective[alpha, lworst_ms, 0]
            reduction = capacity_reduction(protected, unprotected)
            assert reduction is None or 0.0 <= reduction <= 1.0


@pytest.mark.parametrize("name, alpha, gamma, kwargs", [
    ("triangle", 0.05, 0, {}),
    ("triangle", 0.05, 1, {}),
    ("triangle", 0.1, 0, {}),
    ("triangle", 0.1, 1, {}),
    ("triangle", 0.1, 0, {"umax": 2}),
    ("two_site", 0.1, 0, {}),
    ("two_site", 0.15, 0, {}),
    ("chain", 0.05, 0, {}),
    ("bowtie", 0.05, 0, {}),
    ("bowtie", 0.05, 1, {}),
    ("figure1", 0.03, 0, {}),
    ("figure1", 0.03, 1, {}),
])
def test_exact_search_matches_the_oracle(request, name, alpha, gamma, kwargs):
    topology = request.getfixturevalue(name)
    instance = make_instance(topology, alpha=alpha, gamma=gamma, **kwargs)
    exact = _exact(instance)
    oracle = _oracle(instance)
    assert exact.objective == oracle.objective
    assert exact.solution.total_primary == oracle.solution.total_primary
    assert _violations(exact, instance) == []
    assert _violations(oracle, instance) == []


def test_oracle_handles_a_slow_ring(ring4):
    identity = build_independence_matrix(ring4).with_entries(np.eye(4, dtype=np.int8))
    instance = make_instance(ring4, alpha=0.05, lworst_ms=2.5, matrix=identity)
    assert _exact(instance).objective == _oracle(instance).objective


def test_oracle_refuses_large_topologies(rnp_sample):
    instance = make_instance(rnp_sample, alpha=0.05)
    with pytest.raises(OracleGuardError):
        _oracle(instance)


def test_oracle_refuses_large_counts(triangle):
    instance = make_instance(triangle, alpha=0.05)
    with pytest.raises(OracleGuardError):
        brute_force_oracle(instance.topology, instance.matrix, instance.paths, instance.params, max_c=4)


def test_oracle_guard_is_a_value_error():
    assert issubclass(OracleGuardError, ValueError)


@pytest.mark.parametrize("name, alpha, gamma", [
    ("triangle", 0.05, 0),
    ("triangle", 0.1, 1),
    ("bowtie", 0.1, 1),
    ("figure1", 0.05, 0),
    ("ring4", 0.05, 1),
])
def test_greedy_is_feasible_and_no_better_than_exact(request, name, alpha, gamma):
    instance = make_instance(request.getfixturevalue(name), alpha=alpha, gamma=gamma)
    model = PlacementModelBuilder(instance).build()
    greedy = solve_greedy(model)
    assert greedy.status == SolveStatus.FEASIBLE
    assert _violations(greedy, instance) == []
    assert greedy.objective <= solve_exact(model).objective


def test_greedy_fills_the_triangle(triangle):
    greedy = solve_greedy(PlacementModelBuilder(make_instance(triangle, alpha=0.05)).build())
    assert greedy.objective == 3


@pytest.mark.parametrize("seed", range(50))
def test_random_instances_are_feasible_and_consistent(seed):
    rng = random.Random(5000 + seed)
    topology = random_topology(rng, min_sites=2, max_sites=5)
    alpha = rng.choice([0.05, 0.08])
    gamma = rng.randint(0, 1)
    instance = make_instance(topology, alpha=alpha, gamma=gamma)
    model = PlacementModelBuilder(instance).build()

    exact = solve_exact(model)
    assert exact.status == SolveStatus.OPTIMAL
    assert _violations(exact, instance) == []
    assert solve_greedy(model).objective <= exact.objective
    assert exact.objective >= 0

    if alpha == 0.05 and len(instance.pairs) <= 8:
        oracle = _oracle(instance)
        assert exact.objective == oracle.objective
        assert exact.solution.total_primary == oracle.solution.total_primary
