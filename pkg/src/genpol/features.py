"""Feature pools over description logic concepts.

A feature maps a state to a non-negative integer.  Three kinds exist:

* nullary-predicate features (weight 1, boolean),
* cardinality features |C| for a surviving concept C (boolean when the
  denotation has at most one element in every training state, numeric
  otherwise; weight = complexity of C),
* distance features Dist(C1,R,C,C2): minimum number of R-steps through
  targets restricted to C, from the (singleton) denotation of C1 to the
  denotation of C2; weight = sum of the component complexities; value
  m + 1 when unreachable, with m the number of objects.

Concepts and roles are enumerated by increasing complexity, candidates at
equal complexity in lexicographic order of their printable form, and an
expression is pruned when its denotation over *all* training states equals
that of an earlier one.  Feature values are deduplicated the same way.
Features whose weight exceeds the bound are dropped.

Pool generation is vectorized with numpy over the training states, so it
requires at most 62 objects per training instance; policy execution on
larger instances goes through the pure per-state evaluators instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from genpol import concepts as co
from genpol.errors import ArityError, GenpolError, LimitExceededError
from genpol.space import SampleSet


# ---------------------------------------------------------------------------
# Feature kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NullaryFeature:
    pred: str
    weight: int = 1
    is_boolean: bool = True

    def render(self) -> str:
        return f"Atom({self.pred})"

    def evaluate(self, sctx: co.StateContext) -> int:
        if self.pred not in sctx.ictx.gp.domain.predicates:
            raise GenpolError(f"unknown predicate '{self.pred}'")
        return int(self.pred in sctx.nullary)


@dataclass(frozen=True)
class CardinalityFeature:
    concept: object
    weight: int
    is_boolean: bool

    def render(self) -> str:
        return co.render(self.concept)

    def evaluate(self, sctx: co.StateContext) -> int:
        v = co.popcount(co.eval_concept(self.concept, sctx))
        if self.is_boolean:
            return int(v == 1)
        return v


@dataclass(frozen=True)
class DistanceFeature:
    source: object
    role: object
    restrict: object
    target: object
    weight: int
    is_boolean: bool = False

    def render(self) -> str:
        return (f"Dist({co.render(self.source)},{co.render(self.role)},"
                f"{co.render(self.restrict)},{co.render(self.target)})")

    def evaluate(self, sctx: co.StateContext) -> int:
        n = sctx.ictx.n
        return co.bfs_distance(
            co.eval_concept(self.source, sctx),
            co.eval_role(self.role, sctx),
            co.eval_concept(self.restrict, sctx),
            co.eval_concept(self.target, sctx),
            n)


def parse_feature(weight: int, kind: str, text: str):
    """Rebuild a feature from its pool/policy file fields."""
    text = text.strip()
    boolean = kind == "bool"
    if text.startswith("Atom(") and text.endswith(")"):
        return NullaryFeature(text[5:-1].strip(), weight, True)
    if text.startswith("Dist(") and text.endswith(")"):
        args = co._split_args(text[5:-1])
        if len(args) != 4:
            raise co.ExpressionParseError(f"Dist takes 4 arguments: '{text}'")
        return DistanceFeature(co.parse_expression(args[0]), co.parse_role(args[1]),
                               co.parse_expression(args[2]), co.parse_expression(args[3]),
                               weight, False)
    return CardinalityFeature(co.parse_expression(text), weight, boolean)


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

@dataclass
class Vocabulary:
    concepts: list      # atomic concept expressions
    roles: list         # atomic role expressions (primitive + goal versions)
    nullary: list       # nullary predicate names
    goal_binary: list   # binary predicates with a goal version (for Equal)


def primitive_vocabulary(sample: SampleSet, include_types: bool = True,
                         ignore_high_arity: bool = False) -> Vocabulary:
    dom = sample.spaces[0].gp.domain
    high = dom.high_arity_predicates()
    if high and not ignore_high_arity:
        raise ArityError(
            f"predicates of arity > 2 are not supported by feature generation: "
            f"{', '.join(high)} (pass ignore_high_arity to skip them)")

    goal_preds = set()
    for sp in sample.spaces:
        goal_preds.update(a[0] for a in sp.gp.instance.goal)

    atoms: list = [co.Bot(), co.Top()]
    roles: list = []
    nullary: list = []
    goal_binary: list = []
    for pred in sorted(dom.predicates.values(), key=lambda p: p.name):
        if pred.arity == 0:
            nullary.append(pred.name)
        elif pred.arity == 1:
            atoms.append(co.PrimitiveConcept(pred.name))
            if pred.name in goal_preds:
                atoms.append(co.GoalConcept(pred.name))
        elif pred.arity == 2:
            roles.append(co.PrimitiveRole(pred.name))
            if pred.name in goal_preds:
                roles.append(co.GoalRole(pred.name))
                goal_binary.append(pred.name)
    if include_types:
        for t in sorted(dom.types):
            atoms.append(co.TypeConcept(t))

    for name, _ in dom.constants:
        for sp in sample.spaces:
            if name not in sp.gp.object_types:
                raise GenpolError(
                    f"nominal '{name}' does not exist in instance "
                    f"'{sp.gp.instance.name}'")
        atoms.append(co.Nominal(name))
    n_params = {len(sp.gp.instance.goal_params) for sp in sample.spaces}
    if len(n_params) > 1:
        raise GenpolError("training instances declare different numbers of "
                          "goal parameters")
    for i in range(next(iter(n_params))):
        atoms.append(co.Nominal(f"goal{i}"))

    return Vocabulary(atoms, roles, nullary, goal_binary)


# ---------------------------------------------------------------------------
# Batch evaluation over all training states (numpy columns)
# ---------------------------------------------------------------------------

class _Batch:
    """Raw per-state masks/rows for a whole sample, as numpy columns."""

    def __init__(self, sample: SampleSet):
        self.sample = sample
        self.ictxs = [co.InstanceContext(sp.gp) for sp in sample.spaces]
        self.sctxs = []
        for k, sp in enumerate(sample.spaces):
            ictx = self.ictxs[k]
            if ictx.n > 62:
                raise LimitExceededError(
                    f"training instance '{sp.gp.instance.name}' has {ictx.n} "
                    f"objects; feature generation supports at most 62")
            for s in sp.states:
                self.sctxs.append(co.state_context(ictx, s))
        self.n_states = len(self.sctxs)
        self.n_objs = np.array([c.ictx.n for c in self.sctxs], dtype=np.int64)
        self.universe = np.array([c.ictx.universe for c in self.sctxs], dtype=np.int64)
        self.max_n = int(self.n_objs.max())
        self._shifts = np.arange(self.max_n, dtype=np.int64)

    def concept_col(self, expr) -> np.ndarray:
        return np.array([co.eval_concept(expr, c) for c in self.sctxs], dtype=np.int64)

    def role_col(self, expr) -> np.ndarray:
        out = np.zeros((self.n_states, self.max_n), dtype=np.int64)
        for i, c in enumerate(self.sctxs):
            rows = co.eval_role(expr, c)
            out[i, :len(rows)] = rows
        return out

    def pack(self, bits: np.ndarray) -> np.ndarray:
        """bool [S, max_n] -> int64 masks."""
        return (bits.astype(np.int64) << self._shifts).sum(axis=1)

    def popcounts(self, col: np.ndarray) -> np.ndarray:
        return ((col[:, None] >> self._shifts) & 1).sum(axis=1)

    def exists(self, rolecol: np.ndarray, conceptcol: np.ndarray) -> np.ndarray:
        return self.pack((rolecol & conceptcol[:, None]) != 0)

    def forall(self, rolecol: np.ndarray, conceptcol: np.ndarray) -> np.ndarray:
        holds = (rolecol & ~conceptcol[:, None]) == 0
        return self.pack(holds) & self.universe

    def role_equal(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.pack(a == b) & self.universe


# ---------------------------------------------------------------------------
# Pool generation
# ---------------------------------------------------------------------------

@dataclass
class FeaturePool:
    features: list
    weights: np.ndarray
    booleans: np.ndarray  # bool array

    def __len__(self):
        return len(self.features)

    def dump(self) -> str:
        lines = [f"{i} {f.weight} {'bool' if f.is_boolean else 'num'} {f.render()}"
                 for i, f in enumerate(self.features)]
        return "\n".join(lines) + ("\n" if lines else "")


def load_pool(text: str) -> FeaturePool:
    feats = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        idx, weight, kind, expr = line.split(maxsplit=3)
        if int(idx) != len(feats):
            raise GenpolError(f"pool ids must be dense, got {idx}")
        feats.append(parse_feature(int(weight), kind, expr))
    return FeaturePool(feats, np.array([f.weight for f in feats], dtype=np.int64),
                       np.array([f.is_boolean for f in feats], dtype=bool))


def _generate_roles(vocab: Vocabulary, batch: _Batch):
    """Atomic roles plus inverse/closure/closed-inverse, denotation-pruned."""
    kept, seen = [], {}
    levels = {
        1: list(vocab.roles),
        2: [ctor(r) for r in vocab.roles for ctor in (co.InverseRole, co.ClosureRole)],
        3: [co.ClosureRole(co.InverseRole(r)) for r in vocab.roles],
    }
    for level in (1, 2, 3):
        for expr in sorted(levels[level], key=co.render):
            col = batch.role_col(expr)
            sig = col.tobytes()
            if sig in seen:
                continue
            seen[sig] = expr
            kept.append((expr, level, col))
    return kept


def generate_pool(sample: SampleSet, max_weight: int = 8, max_pool: int = 200_000,
                  include_types: bool = True, ignore_high_arity: bool = False):
    """Returns (FeaturePool, value matrix over the sample's global states)."""
    vocab = primitive_vocabulary(sample, include_types, ignore_high_arity)
    batch = _Batch(sample)

    roles = _generate_roles(vocab, batch)

    # Concepts, level by level.  kept: list of (expr, weight, column).
    kept: list = []
    by_weight: dict = {}
    seen: dict = {}

    def consider(expr, weight):
        col = _concept_col(expr, batch, cols, rolemap)
        sig = col.tobytes()
        if sig in seen:
            return
        seen[sig] = expr
        kept.append((expr, weight, col))
        by_weight.setdefault(weight, []).append((expr, col))
        cols[expr] = col

    cols: dict = {}
    rolemap = {expr: col for expr, _, col in roles}

    for level in range(1, max_weight + 1):
        cands: list = []
        if level == 1:
            cands = list(vocab.concepts)
        else:
            for expr, _ in by_weight.get(level - 1, []):
                cands.append(co.Not(expr))
            for wa in range(1, level - 1):
                wb = level - 1 - wa
                if wa > wb:
                    continue
                for a, _ in by_weight.get(wa, []):
                    for b, _ in by_weight.get(wb, []):
                        ra, rb = co.render(a), co.render(b)
                        if (wa, ra) < (wb, rb):
                            cands.append(co.And(a, b))
            for rexpr, rw, _ in roles:
                cw = level - 1 - rw
                for c, _ in by_weight.get(cw, []):
                    cands.append(co.Exists(rexpr, c))
                    cands.append(co.Forall(rexpr, c))
            if level == 3:
                for pred in vocab.goal_binary:
                    cands.append(co.RoleEqual(co.PrimitiveRole(pred), co.GoalRole(pred)))
        for expr in sorted(cands, key=co.render):
            consider(expr, level)

    # Features.
    feats: list = []  # (feature, value column)
    for pred in sorted(vocab.nullary):
        if 1 <= max_weight:
            col = np.array([int(pred in c.nullary) for c in batch.sctxs], dtype=np.int64)
            feats.append((NullaryFeature(pred), col))

    singletons: list = []
    for expr, weight, col in kept:
        if isinstance(expr, (co.Top, co.Bot)):
            continue  # fixed denotation; |Top| and |Bot| carry no signal
        counts = batch.popcounts(col)
        boolean = bool((counts <= 1).all())
        if weight <= max_weight:
            values = (counts == 1).astype(np.int64) if boolean else counts
            feats.append((CardinalityFeature(expr, weight, boolean), values))
        if (counts == 1).all():
            singletons.append((expr, weight, col))

    # Distance features, one BFS per (source, role, restrict, state); each
    # target concept then reads its minimum off the per-object distance map.
    role_rows_cache: dict = {}

    def rows_lists(rexpr):
        if rexpr not in role_rows_cache:
            col = rolemap[rexpr]
            role_rows_cache[rexpr] = [tuple(int(x) for x in row) for row in col]
        return role_rows_cache[rexpr]

    ns = [c.ictx.n for c in batch.sctxs]
    for c1, w1, col1 in singletons:
        for rexpr, rw, _ in roles:
            base = w1 + rw
            if base + 2 > max_weight:
                continue
            rows = rows_lists(rexpr)
            for wr in range(1, max_weight - base):
                for cr, colr in by_weight.get(wr, []):
                    dmaps = [co.bfs_distance_map(int(col1[s]), rows[s],
                                                 int(colr[s]), ns[s])
                             for s in range(batch.n_states)]
                    for w2 in range(1, max_weight - base - wr + 1):
                        for c2, col2 in by_weight.get(w2, []):
                            values = np.fromiter(
                                (_map_min(dmaps[s], int(col2[s]), ns[s])
                                 for s in range(batch.n_states)),
                                dtype=np.int64, count=batch.n_states)
                            feats.append((DistanceFeature(c1, rexpr, cr, c2,
                                                          base + wr + w2), values))

    # Canonical order, then value-vector deduplication.  Features that are
    # constant over every training state can never separate, descend, or
    # distinguish anything, so they are dropped as well.
    feats.sort(key=lambda fc: (fc[0].weight, fc[0].render()))
    final: list = []
    cols_out: list = []
    value_seen: set = set()
    for f, col in feats:
        if col.size and np.all(col == col[0]):
            continue
        sig = col.tobytes()
        if sig in value_seen:
            continue
        value_seen.add(sig)
        final.append(f)
        cols_out.append(col)
        if len(final) > max_pool:
            raise LimitExceededError(f"feature pool exceeds cap of {max_pool}")

    pool = FeaturePool(final,
                       np.array([f.weight for f in final], dtype=np.int64),
                       np.array([f.is_boolean for f in final], dtype=bool))
    matrix = np.vstack(cols_out) if cols_out else np.zeros((0, batch.n_states), dtype=np.int64)
    return pool, matrix


def _map_min(dmap: list, targets: int, n: int) -> int:
    best = n + 1
    while targets:
        low = targets & -targets
        d = dmap[low.bit_length() - 1]
        if d < best:
            best = d
        targets ^= low
    return best


def _concept_col(expr, batch: _Batch, cols: dict, rolemap: dict) -> np.ndarray:
    """Column for a candidate, composed from already-kept children columns."""
    if isinstance(expr, co.Not):
        return batch.universe & ~cols[expr.child]
    if isinstance(expr, co.And):
        return cols[expr.left] & cols[expr.right]
    if isinstance(expr, co.Exists):
        return batch.exists(rolemap[expr.role], cols[expr.child])
    if isinstance(expr, co.Forall):
        return batch.forall(rolemap[expr.role], cols[expr.child])
    if isinstance(expr, co.RoleEqual):
        return batch.role_equal(batch.role_col(expr.left), batch.role_col(expr.right))
    return batch.concept_col(expr)  # atomic


def evaluate_matrix(pool: FeaturePool, sample: SampleSet) -> np.ndarray:
    """Fresh per-state evaluation of every pool feature; int64 [n_features, n_states].

    Independent of the columns cached during generation; the two paths must
    agree and are cross-checked in tests.
    """
    values = np.zeros((len(pool), sample.n_states), dtype=np.int64)
    g = 0
    for sp in sample.spaces:
        ictx = co.InstanceContext(sp.gp)
        for s in sp.states:
            sctx = co.state_context(ictx, s)
            for i, f in enumerate(pool.features):
                values[i, g] = f.evaluate(sctx)
            g += 1
    return values


def boolean_matrix(pool: FeaturePool, values: np.ndarray) -> np.ndarray:
    """Boolean counterparts: the value itself for booleans, value > 0 for numerics."""
    bools = values > 0
    b = pool.booleans[:, None]
    return np.where(b, values.astype(bool), bools).astype(np.uint8)
