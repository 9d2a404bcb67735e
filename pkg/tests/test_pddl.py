"""Parser, grounder and successor generator tests."""

import pytest

from genpol import pddl
from genpol.errors import PddlError, UnsupportedPddlError

import domains
import oracles


def _gripper(n=2, seed=None):
    dom = pddl.parse_domain(domains.GRIPPER_DOMAIN)
    inst = pddl.parse_instance(domains.gripper_instance(n, seed), dom)
    return dom, inst


def test_parse_domain_basics():
    dom = pddl.parse_domain(domains.GRIPPER_DOMAIN)
    assert dom.name == "gripper"
    assert sorted(dom.predicates) == ["at", "at-robby", "carry", "free"]
    assert dom.predicates["carry"].arity == 2
    assert sorted(s.name for s in dom.schemas) == ["drop", "move", "pick"]
    assert dom.types["ball"] == "object"


def test_parse_blocks_domain_untyped():
    dom = pddl.parse_domain(domains.BLOCKS_DOMAIN)
    assert sorted(s.name for s in dom.schemas) == \
           ["pickup", "putdown", "stack", "unstack"]
    assert dom.predicates["arm-empty"].arity == 0
    pickup = next(s for s in dom.schemas if s.name == "pickup")
    assert [t for _v, t in pickup.params] == ["object"]


def test_parse_instance_goal_and_init():
    dom, inst = _gripper(2)
    assert ("at", "ball1", "rooma") in inst.init
    assert ("at-robby", "rooma") in inst.init
    assert ("at", "ball2", "roomb") in inst.goal


def test_parse_error_position():
    with pytest.raises(PddlError) as exc:
        pddl.parse_domain("(define (domain broken)\n  (:predicates (p ?x)\n")
    assert exc.value.line >= 1


def test_unsupported_features_rejected():
    text = """
    (define (domain neg)
      (:predicates (p ?x) (q ?x))
      (:action a :parameters (?x)
        :precondition (and (not (p ?x)))
        :effect (and (q ?x))))
    """
    with pytest.raises(UnsupportedPddlError):
        pddl.parse_domain(text)


def test_undeclared_predicate_rejected():
    text = """
    (define (domain bad)
      (:predicates (p ?x))
      (:action a :parameters (?x)
        :precondition (and (r ?x))
        :effect (and (p ?x))))
    """
    with pytest.raises(PddlError):
        pddl.parse_domain(text)


def test_ground_action_count_matches_brute_force_gripper():
    dom, inst = _gripper(3, seed=5)
    gp = pddl.ground(dom, inst)
    expected = oracles.brute_force_ground_actions(dom, inst)
    assert sorted(a.name for a in gp.actions) == expected


def test_ground_action_count_matches_brute_force_blocks():
    dom = pddl.parse_domain(domains.BLOCKS_DOMAIN)
    inst = pddl.parse_instance(domains.clear_tower_instance(5), dom, ["b1"])
    gp = pddl.ground(dom, inst)
    expected = oracles.brute_force_ground_actions(dom, inst)
    assert sorted(a.name for a in gp.actions) == expected


def test_ground_repeated_binding_self_loop():
    """move(rooma, rooma) is type-consistent and must be generated; its
    delete set drops atoms it also adds."""
    dom, inst = _gripper(1)
    gp = pddl.ground(dom, inst)
    names = {a.name for a in gp.actions}
    assert "move(rooma,rooma)" in names
    act = next(a for a in gp.actions if a.name == "move(rooma,rooma)")
    assert not (act.add & act.dele)


def test_statically_false_preconditions_pruned():
    """pick requires (at ?b ?r): bindings with a gripper in the ball slot are
    never applicable and must not be grounded."""
    dom, inst = _gripper(2)
    gp = pddl.ground(dom, inst)
    assert all(not a.name.startswith("pick(left")
               for a in gp.actions)


def test_applicable_matches_hand_simulation():
    dom = pddl.parse_domain(domains.BLOCKS_DOMAIN)
    text = """(define (problem two) (:domain blocksworld)
      (:objects a b)
      (:init (arm-empty) (on-table a) (on b a) (clear b))
      (:goal (and (clear a))))"""
    inst = pddl.parse_instance(text, dom, ["a"])
    gp = pddl.ground(dom, inst)
    applicable = {gp.actions[i].name for i in gp.applicable(gp.init)}
    assert applicable == {"unstack(b,a)"}
    succ = gp.successors(gp.init)
    (aid, s2), = succ
    assert gp.actions[aid].name == "unstack(b,a)"
    applicable2 = {gp.actions[i].name for i in gp.applicable(s2)}
    assert applicable2 == {"putdown(b)", "stack(b,a)"}


def test_successor_states_are_frozensets_of_atom_ids():
    dom, inst = _gripper(1)
    gp = pddl.ground(dom, inst)
    for _aid, s2 in gp.successors(gp.init):
        assert isinstance(s2, frozenset)
        assert all(0 <= a < len(gp.atoms) for a in s2)


def test_atom_ids_deterministic_and_sorted():
    dom, inst = _gripper(2)
    gp1 = pddl.ground(dom, inst)
    gp2 = pddl.ground(dom, pddl.parse_instance(domains.gripper_instance(2), dom))
    assert [gp1.atoms[i] for i in range(len(gp1.atoms))] == \
           [gp2.atoms[i] for i in range(len(gp2.atoms))]
    assert gp1.atoms == sorted(gp1.atoms)


def test_goal_params_recorded():
    dom = pddl.parse_domain(domains.BLOCKS_DOMAIN)
    inst = pddl.parse_instance(domains.clear_tower_instance(3), dom, ["b1"])
    assert inst.goal_params == ("b1",)
    with pytest.raises(PddlError):
        pddl.parse_instance(domains.clear_tower_instance(3), dom, ["nope"])


def test_format_round_trip():
    dom = pddl.parse_domain(domains.GRIPPER_DOMAIN)
    text2 = pddl.format_domain(dom)
    dom2 = pddl.parse_domain(text2)
    assert dom2.predicates.keys() == dom.predicates.keys()
    assert {sc.name for sc in dom2.schemas} == {sc.name for sc in dom.schemas}
    inst = pddl.parse_instance(domains.gripper_instance(2), dom)
    inst2 = pddl.parse_instance(pddl.format_instance(inst, dom), dom2)
    assert set(inst2.init) == set(inst.init)
    assert set(inst2.goal) == set(inst.goal)
