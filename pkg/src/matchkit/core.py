"""Shared domain types, instance validation, and small utilities.

Instances are plain dicts parsed from JSON.  Every instance has a top-level
``family`` key (one of ``one-sided``, ``two-sided``, ``contracts``,
``reserves``, ``exchange``) plus family-specific payload keys.  Validation
collects *all* problems it can find rather than stopping at the first one.

Allocations are plain dicts mapping agent id -> assignment, where an
assignment is a resource id (str), a tuple/list with extra labels
(category, price tier, ...), or None for unmatched.  Unmatched agents are
always present in the map explicitly.
"""

from __future__ import annotations

FAMILIES = ("one-sided", "two-sided", "contracts", "reserves", "exchange")


class ValidationError(ValueError):
    """Raised when an instance fails validation; carries every error found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class MechanismError(RuntimeError):
    """Raised when a mechanism's preconditions are violated at run time."""


class CapExceeded(RuntimeError):
    """Raised when an exhaustive operation is asked to exceed its size cap."""


# ---------------------------------------------------------------------------
# Deterministic pseudo-randomness (splitmix64)
# ---------------------------------------------------------------------------

_MASK = (1 << 64) - 1


def splitmix64(seed):
    """Infinite generator of 64-bit pseudo-random integers from a seed."""
    state = seed & _MASK
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        yield z ^ (z >> 31)


def shuffled(items, seed):
    """Fisher-Yates shuffle of ``items`` driven by the splitmix64 stream."""
    out = list(items)
    stream = splitmix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = next(stream) % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def rand_below(stream, n):
    """Draw a uniform integer in [0, n) from a splitmix64 stream."""
    return next(stream) % n


# ---------------------------------------------------------------------------
# Ranking enumeration
# ---------------------------------------------------------------------------

MAX_ENUM_RESOURCES = 6


def enumerate_rankings(resources, max_len):
    """All ordered selections (without repetition) of the given resources,
    of every length from 0 to ``max_len``, in deterministic lexicographic
    order.  Fuel for exhaustive manipulation searches."""
    items = sorted(resources)
    if len(items) > MAX_ENUM_RESOURCES:
        raise CapExceeded(
            "enumerate_rankings supports at most %d resources, got %d"
            % (MAX_ENUM_RESOURCES, len(items))
        )
    max_len = min(max_len, len(items))
    out = [[]]
    frontier = [[]]
    for _ in range(max_len):
        nxt = []
        for prefix in frontier:
            used = set(prefix)
            for r in items:
                if r not in used:
                    nxt.append(prefix + [r])
        frontier = nxt
        out.extend(frontier)
    # Lexicographic order over the sequences themselves (shorter prefixes
    # first when they are prefixes; plain tuple order otherwise).
    out.sort(key=lambda seq: tuple(seq))
    return out


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------

def _check_strict_list(name, items, universe, errors, what="entry"):
    """Check a ranking/queue: no duplicates and every item exists."""
    seen = set()
    for x in items:
        if x in seen:
            errors.append("%s: non-strict ranking (duplicate %s %r)" % (name, what, x))
        seen.add(x)
        if universe is not None and x not in universe:
            errors.append("%s: dangling reference %r" % (name, x))


def _check_ids(ids, namespace, errors):
    seen = set()
    for x in ids:
        if not isinstance(x, str) or not x:
            errors.append("%s: id must be a non-empty string, got %r" % (namespace, x))
        if x in seen:
            errors.append("%s: duplicate id %r" % (namespace, x))
        seen.add(x)


def _validate_one_sided(inst, errors):
    tenants = inst.get("tenants", {})
    newcomers = inst.get("newcomers", [])
    vacants = inst.get("vacant_houses", [])
    prefs = inst.get("preferences", {})
    queue = inst.get("queue", [])

    agents = list(tenants) + list(newcomers)
    houses = list(tenants.values()) + list(vacants)
    _check_ids(agents, "agents", errors)
    _check_ids(houses, "houses", errors)
    if len(set(tenants.values())) != len(tenants):
        errors.append("tenants: endowment map not injective")
    house_set = set(houses)
    agent_set = set(agents)
    for a in agents:
        if a not in prefs:
            errors.append("preferences: missing ranking for agent %r" % a)
        else:
            _check_strict_list("preferences[%s]" % a, prefs[a], house_set, errors)
    for a in prefs:
        if a not in agent_set:
            errors.append("preferences: unknown agent %r" % a)
    for t, h in tenants.items():
        if t in prefs and h not in prefs[t]:
            errors.append("preferences: tenant %r does not rank own house %r" % (t, h))
    _check_strict_list("queue", queue, agent_set, errors)
    if set(queue) != agent_set:
        errors.append("queue: must cover every agent exactly once")


def _school_priority_errors(school, spec, students, errors):
    cap = spec.get("capacity")
    if not isinstance(cap, int) or cap < 1:
        errors.append("schools[%s]: capacity must be an integer >= 1" % school)
    if "priority" in spec:
        _check_strict_list("schools[%s].priority" % school, spec["priority"],
                           set(students), errors)


def _validate_two_sided(inst, errors):
    students = inst.get("students", {})
    schools = inst.get("schools", {})
    fields = inst.get("fields", {})
    scores = inst.get("scores", {})
    _check_ids(students, "students", errors)
    _check_ids(schools, "schools", errors)
    school_set = set(schools)
    for s, ranking in students.items():
        _check_strict_list("students[%s]" % s, ranking, school_set, errors)
    for c, spec in schools.items():
        _school_priority_errors(c, spec, students, errors)
        fld = spec.get("field")
        if fld is not None and fld not in fields:
            errors.append("schools[%s]: unknown field %r" % (c, fld))
        if "priority" not in spec and fld is None and not scores:
            errors.append("schools[%s]: needs a priority list, a field, or scores" % c)
    for f, ranking in fields.items():
        _check_strict_list("fields[%s]" % f, ranking, set(students), errors)
        if set(ranking) != set(students):
            errors.append("fields[%s]: must rank every student" % f)
    if scores:
        for s, v in scores.items():
            if s not in students:
                errors.append("scores: unknown student %r" % s)
            if not isinstance(v, int):
                errors.append("scores[%s]: merit scores must be integers" % s)
        vals = [v for v in scores.values() if isinstance(v, int)]
        if len(set(vals)) != len(vals):
            errors.append("scores: merit ties are not allowed; pre-break ties")
        for s in students:
            if s not in scores:
                errors.append("scores: missing score for student %r" % s)
    # A priority list given together with scores must be consistent.
    for c, spec in schools.items():
        pri = spec.get("priority")
        sc = spec.get("scores")
        if pri is not None and sc is not None:
            ordered = sorted(sc, key=lambda a: -sc[a])
            if pri != ordered:
                errors.append("schools[%s]: priority inconsistent with scores" % c)


def _validate_contracts(inst, errors):
    cadets = inst.get("cadets", {})
    branches = inst.get("branches", {})
    ladder = inst.get("price_ladder", ["base"])
    oml = inst.get("oml", [])
    _check_ids(cadets, "cadets", errors)
    _check_ids(branches, "branches", errors)
    if not isinstance(ladder, list) or not ladder:
        errors.append("price_ladder: must be a non-empty list of tier labels")
        ladder = ["base"]
    _check_strict_list("oml", oml, set(cadets), errors)
    if set(oml) != set(cadets):
        errors.append("oml: must rank every cadet exactly once")
    for b, spec in branches.items():
        cap = spec.get("capacity")
        if not isinstance(cap, int) or cap < 1:
            errors.append("branches[%s]: capacity must be an integer >= 1" % b)
        flex = spec.get("flexible", 0)
        if not isinstance(flex, int) or flex < 0 or (isinstance(cap, int) and flex > cap):
            errors.append("branches[%s]: flexible count must be in [0, capacity]" % b)
        scheme = spec.get("scheme", {"kind": "ultimate"})
        kind = scheme.get("kind")
        if kind not in ("ultimate", "tiered", "scoring"):
            errors.append("branches[%s]: unknown scheme kind %r" % (b, kind))
        if kind == "tiered":
            tiers = scheme.get("tiers", {})
            for c in cadets:
                if c not in tiers:
                    errors.append("branches[%s]: tiered scheme missing tier for %r" % (b, c))
        if kind == "scoring":
            boosts = scheme.get("boosts")
            if not isinstance(boosts, list) or len(boosts) != len(ladder):
                errors.append("branches[%s]: scoring scheme needs one boost per tier" % b)
            elif boosts and (boosts[0] != 0 or any(
                    boosts[i] > boosts[i + 1] for i in range(len(boosts) - 1))):
                errors.append("branches[%s]: boosts must start at 0 and be "
                              "weakly increasing" % b)
            scores = inst.get("scores", {})
            for c in cadets:
                if c not in scores:
                    errors.append("scores: scoring scheme needs a score for %r" % c)
    for c, spec in cadets.items():
        if isinstance(spec, dict) and "ranking" in spec:
            # usma2006-style strategy: branch ranking + volunteer set
            _check_strict_list("cadets[%s].ranking" % c, spec["ranking"],
                               set(branches), errors)
            for b in spec.get("bradso", []):
                if b not in branches:
                    errors.append("cadets[%s].bradso: dangling reference %r" % (c, b))
        else:
            prefs = spec if isinstance(spec, list) else spec.get("preferences", [])
            seen = set()
            for item in prefs:
                if (not isinstance(item, (list, tuple)) or len(item) != 2):
                    errors.append("cadets[%s]: contract must be [branch, tier]" % c)
                    continue
                b, t = item
                if b not in branches:
                    errors.append("cadets[%s]: dangling reference %r" % (c, b))
                if not isinstance(t, int) or t < 0 or t >= len(ladder):
                    errors.append("cadets[%s]: unknown price tier %r" % (c, t))
                if (b, t) in seen:
                    errors.append("cadets[%s]: non-strict ranking (duplicate %r)"
                                  % (c, (b, t)))
                seen.add((b, t))


def _validate_reserves(inst, errors):
    if "institutions" in inst:
        insts = inst["institutions"]
        _check_ids(insts, "institutions", errors)
        for name, sub in insts.items():
            _validate_reserve_side(sub, inst.get("applicants", {}),
                                   "institutions[%s]." % name, errors)
        for a, spec in inst.get("applicants", {}).items():
            prefs = spec.get("preferences", [])
            _check_strict_list("applicants[%s].preferences" % a, prefs,
                               set(insts), errors)
        _validate_applicants(inst.get("applicants", {}), errors)
    else:
        _validate_reserve_side(inst, inst.get("applicants", {}), "", errors)
        _validate_applicants(inst.get("applicants", {}), errors)


def _validate_applicants(applicants, errors):
    _check_ids(applicants, "applicants", errors)
    scores = []
    for a, spec in applicants.items():
        sc = spec.get("score")
        if not isinstance(sc, int):
            errors.append("applicants[%s]: merit score must be an integer" % a)
        else:
            scores.append(sc)
        hr = spec.get("hr", [])
        if len(set(hr)) != len(hr):
            errors.append("applicants[%s]: duplicate HR trait" % a)
    if len(set(scores)) != len(scores):
        errors.append("applicants: merit ties are not allowed; pre-break ties")


def _validate_reserve_side(side, applicants, prefix, errors):
    cats = side.get("categories", {})
    for cname, spec in cats.items():
        cap = spec.get("capacity")
        if not isinstance(cap, int) or cap < 1:
            errors.append("%scategories[%s]: capacity must be an integer >= 1"
                          % (prefix, cname))
        hr = spec.get("hr_reserves", {})
        total = sum(hr.values())
        if isinstance(cap, int) and total > cap:
            errors.append("%scategories[%s]: HR reserves exceed capacity"
                          % (prefix, cname))
        for t, n in hr.items():
            if not isinstance(n, int) or n < 1:
                errors.append("%scategories[%s]: HR reserve for %r must be >= 1"
                              % (prefix, cname, t))
    vr_names = set(cats) - {"open"}
    for a, spec in applicants.items():
        vr = spec.get("vr", "general")
        if vr != "general" and cats and vr not in vr_names:
            errors.append("%sapplicants[%s]: unknown VR category %r"
                          % (prefix, a, vr))
    for slot in side.get("precedence", []):
        if slot.get("type") not in ("open", "reserved"):
            errors.append("%sprecedence: slot type must be open|reserved" % prefix)
        if slot.get("type") == "reserved" and not slot.get("trait"):
            errors.append("%sprecedence: reserved slot needs a trait" % prefix)


def _validate_exchange(inst, errors):
    pairs = inst.get("pairs", {})
    ndds = inst.get("ndds", [])
    arcs = inst.get("arcs", [])
    _check_ids(list(pairs) + list(ndds), "pairs/ndds", errors)
    kidney_set = set(pairs) | set(ndds)
    for p, spec in pairs.items():
        prefs = spec.get("preferences")
        if prefs is not None:
            _check_strict_list("pairs[%s].preferences" % p, prefs,
                               kidney_set | {"w"}, errors)
    for arc in arcs:
        if not isinstance(arc, (list, tuple)) or len(arc) != 2:
            errors.append("arcs: each arc must be [donor, patient]")
            continue
        d, pat = arc
        if d not in kidney_set:
            errors.append("arcs: dangling donor %r" % d)
        if pat not in pairs:
            errors.append("arcs: dangling patient %r" % pat)
    priority = inst.get("priority", [])
    _check_strict_list("priority", priority, set(pairs), errors)


_VALIDATORS = {
    "one-sided": _validate_one_sided,
    "two-sided": _validate_two_sided,
    "contracts": _validate_contracts,
    "reserves": _validate_reserves,
    "exchange": _validate_exchange,
}


def validate_instance(inst):
    """Validate an instance dict.  Returns the instance unchanged if every
    invariant holds; otherwise raises ValidationError listing all problems."""
    errors = []
    family = inst.get("family")
    if family not in FAMILIES:
        errors.append("family: must be one of %s, got %r" % (", ".join(FAMILIES), family))
        raise ValidationError(errors)
    _VALIDATORS[family](inst, errors)
    if errors:
        raise ValidationError(errors)
    return inst


# ---------------------------------------------------------------------------
# Allocation helpers
# ---------------------------------------------------------------------------

def canonical_allocation(alloc):
    """Canonical, hashable form of an allocation for equality checks."""
    def freeze(v):
        if isinstance(v, (list, tuple)):
            return tuple(v)
        return v
    return tuple(sorted((a, freeze(v)) for a, v in alloc.items()))


def jsonable_allocation(alloc):
    """JSON-friendly form: tuples become lists, unmatched becomes null."""
    out = {}
    for a, v in sorted(alloc.items()):
        out[a] = list(v) if isinstance(v, tuple) else v
    return out


def assigned_resource(assignment):
    """The resource id inside an assignment value (or None if unmatched)."""
    if assignment is None:
        return None
    if isinstance(assignment, (list, tuple)):
        return assignment[0]
    return assignment
