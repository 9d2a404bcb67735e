"""PDDL text builders and seeded random instance generators for the tests."""

import random

GRIPPER_DOMAIN = """
(define (domain gripper)
  (:requirements :strips :typing)
  (:types room ball gripper - object)
  (:predicates (at-robby ?r - room)
               (at ?b - ball ?r - room)
               (free ?g - gripper)
               (carry ?b - ball ?g - gripper))
  (:action move
    :parameters (?from ?to - room)
    :precondition (and (at-robby ?from))
    :effect (and (at-robby ?to) (not (at-robby ?from))))
  (:action pick
    :parameters (?b - ball ?r - room ?g - gripper)
    :precondition (and (at ?b ?r) (at-robby ?r) (free ?g))
    :effect (and (carry ?b ?g) (not (at ?b ?r)) (not (free ?g))))
  (:action drop
    :parameters (?b - ball ?r - room ?g - gripper)
    :precondition (and (carry ?b ?g) (at-robby ?r))
    :effect (and (at ?b ?r) (free ?g) (not (carry ?b ?g)))))
"""

BLOCKS_DOMAIN = """
(define (domain blocksworld)
  (:requirements :strips)
  (:predicates (clear ?x) (on-table ?x) (holding ?x) (on ?x ?y) (arm-empty))
  (:action pickup
    :parameters (?ob)
    :precondition (and (clear ?ob) (on-table ?ob) (arm-empty))
    :effect (and (holding ?ob) (not (clear ?ob)) (not (on-table ?ob))
                 (not (arm-empty))))
  (:action putdown
    :parameters (?ob)
    :precondition (and (holding ?ob))
    :effect (and (clear ?ob) (arm-empty) (on-table ?ob) (not (holding ?ob))))
  (:action stack
    :parameters (?ob ?underob)
    :precondition (and (clear ?underob) (holding ?ob))
    :effect (and (arm-empty) (clear ?ob) (on ?ob ?underob)
                 (not (clear ?underob)) (not (holding ?ob))))
  (:action unstack
    :parameters (?ob ?underob)
    :precondition (and (on ?ob ?underob) (clear ?ob) (arm-empty))
    :effect (and (holding ?ob) (clear ?underob)
                 (not (on ?ob ?underob)) (not (clear ?ob)) (not (arm-empty)))))
"""

VISITALL_DOMAIN = """
(define (domain grid-visit-all)
  (:requirements :strips :typing)
  (:types place - object)
  (:predicates (at-robot ?x - place)
               (connected ?x ?y - place)
               (visited ?x - place))
  (:action move
    :parameters (?curpos ?nextpos - place)
    :precondition (and (at-robot ?curpos) (connected ?curpos ?nextpos))
    :effect (and (at-robot ?nextpos) (visited ?nextpos)
                 (not (at-robot ?curpos)))))
"""


def gripper_instance(n_balls: int, seed=None, name=None) -> str:
    """Balls in random rooms (all in rooma when seed is None); goal: all in
    roomb."""
    rng = random.Random(seed)
    balls = [f"ball{i}" for i in range(1, n_balls + 1)]
    if seed is None:
        where = {b: "rooma" for b in balls}
        robby = "rooma"
    else:
        where = {b: rng.choice(["rooma", "roomb"]) for b in balls}
        robby = rng.choice(["rooma", "roomb"])
    init = [f"(at-robby {robby})", "(free left)", "(free right)"]
    init += [f"(at {b} {where[b]})" for b in balls]
    goal = [f"(at {b} roomb)" for b in balls]
    name = name or f"gripper-{n_balls}-{seed}"
    return (f"(define (problem {name}) (:domain gripper)\n"
            f"  (:objects rooma roomb - room {' '.join(balls)} - ball "
            f"left right - gripper)\n"
            f"  (:init {' '.join(init)})\n"
            f"  (:goal (and {' '.join(goal)})))")


def clear_tower_instance(n_blocks: int, name=None) -> str:
    """Single tower b1..bn bottom to top; goal: clear(b1)."""
    blocks = [f"b{i}" for i in range(1, n_blocks + 1)]
    init = ["(arm-empty)", f"(on-table {blocks[0]})", f"(clear {blocks[-1]})"]
    init += [f"(on {a} {b})" for b, a in zip(blocks, blocks[1:])]
    name = name or f"clear-{n_blocks}"
    return (f"(define (problem {name}) (:domain blocksworld)\n"
            f"  (:objects {' '.join(blocks)})\n"
            f"  (:init {' '.join(init)})\n"
            f"  (:goal (and (clear b1))))")


def clear_random_instance(n_blocks: int, seed: int):
    """Random towers; goal: clear a random block.  Returns (text, target)."""
    rng = random.Random(seed)
    blocks = [f"b{i}" for i in range(1, n_blocks + 1)]
    order = blocks[:]
    rng.shuffle(order)
    init = ["(arm-empty)"]
    towers, cur = [], []
    for b in order:
        cur.append(b)
        if rng.random() < 0.35:
            towers.append(cur)
            cur = []
    if cur:
        towers.append(cur)
    for t in towers:
        init.append(f"(on-table {t[0]})")
        init += [f"(on {a} {b})" for b, a in zip(t, t[1:])]
        init.append(f"(clear {t[-1]})")
    target = rng.choice(blocks)
    text = (f"(define (problem clear-r{n_blocks}-{seed}) (:domain blocksworld)\n"
            f"  (:objects {' '.join(blocks)})\n"
            f"  (:init {' '.join(init)})\n"
            f"  (:goal (and (clear {target}))))")
    return text, target


def visitall_instance(width: int, height: int, start, visited=(), name=None) -> str:
    """Grid with 4-neighbour connectivity; goal: visit every cell."""
    cells = [(x, y) for x in range(width) for y in range(height)]
    objs = " ".join(f"loc-{x}-{y}" for x, y in cells)
    conn = []
    for x, y in cells:
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = x + dx, y + dy
            if 0 <= nx < width and 0 <= ny < height:
                conn.append(f"(connected loc-{x}-{y} loc-{nx}-{ny})")
    vis = sorted(set(visited) | {tuple(start)})
    init = [f"(at-robot loc-{start[0]}-{start[1]})"]
    init += [f"(visited loc-{x}-{y})" for x, y in vis]
    init += conn
    goal = [f"(visited loc-{x}-{y})" for x, y in cells]
    name = name or f"visitall-{width}x{height}"
    return (f"(define (problem {name}) (:domain grid-visit-all)\n"
            f"  (:objects {objs} - place)\n"
            f"  (:init {' '.join(init)})\n"
            f"  (:goal (and {' '.join(goal)})))")
