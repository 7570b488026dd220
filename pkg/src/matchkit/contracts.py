"""Matching with contracts: slot-based branch choice rules, choice-rule
condition checkers, the cumulative offer process, the multi-price
cumulative offer mechanism, and the two-criteria sequential mechanism it
replaced.

A contract is a (cadet, branch, tier) triple with tier 0 the base price.
Contract allocations map cadet -> (branch, tier) or None.
"""

from __future__ import annotations

from itertools import combinations

from .core import CapExceeded, MechanismError


def contract(cadet, branch, tier):
    return (cadet, branch, tier)


def _oml_rank(inst):
    return {c: i for i, c in enumerate(inst["oml"])}


def cadet_preferences(inst):
    """Per-cadet strict ranking over (branch, tier) pairs.  For strategies
    given as a branch ranking plus volunteer set (the two-criteria
    mechanism's strategy space), the induced ranking lists, per branch in
    ranked order, the base-price pair then (if volunteered) the elevated
    pair."""
    prefs = {}
    for c, spec in inst["cadets"].items():
        if isinstance(spec, dict) and "ranking" in spec:
            bradso = set(spec.get("bradso", []))
            expanded = []
            for b in spec["ranking"]:
                expanded.append((b, 0))
                if b in bradso:
                    expanded.append((b, 1))
            prefs[c] = expanded
        else:
            raw = spec if isinstance(spec, list) else spec["preferences"]
            prefs[c] = [tuple(p) for p in raw]
    return prefs


# ---------------------------------------------------------------------------
# Price-responsiveness schemes and slot choice rules
# ---------------------------------------------------------------------------

def scheme_key(inst, branch):
    """Sort key over (cadet, tier) pairs for the branch's flexible slots:
    smaller key = higher priority.  Equal-price pairs follow the base
    priority; for a fixed cadet a higher price never lowers priority."""
    spec = inst["branches"][branch]
    scheme = spec.get("scheme", {"kind": "ultimate"})
    kind = scheme.get("kind", "ultimate")
    oml = _oml_rank(inst)
    if kind == "ultimate":
        return lambda ct: (-ct[1], oml[ct[0]])
    if kind == "tiered":
        tiers = scheme["tiers"]
        return lambda ct: (tiers[ct[0]], -ct[1], oml[ct[0]])
    if kind == "scoring":
        boosts = scheme["boosts"]
        scores = inst["scores"]
        return lambda ct: (-(scores[ct[0]] + boosts[ct[1]]),
                           -scores[ct[0]], oml[ct[0]])
    raise MechanismError("unknown scheme kind %r" % kind)


def base_key(inst, branch):
    """Sort key over cadets for the branch's regular (base-price-only)
    slots: the base priority of the branch."""
    spec = inst["branches"][branch]
    scheme = spec.get("scheme", {"kind": "ultimate"})
    oml = _oml_rank(inst)
    if scheme.get("kind") == "tiered":
        tiers = scheme["tiers"]
        return lambda c: (tiers[c], oml[c])
    return lambda c: oml[c]


def slot_choice(inst, branch, offers):
    """The branch's choice from a set of offered contracts: regular slots
    (base-price contracts only, base priority) are filled first, then
    flexible slots (any tier, scheme priority); each slot takes the
    highest-priority eligible offer whose cadet is not already chosen."""
    spec = inst["branches"][branch]
    n_flex = spec.get("flexible", 0)
    n_reg = spec["capacity"] - n_flex
    offers = [o for o in offers if o[1] == branch]
    bkey = base_key(inst, branch)
    skey = scheme_key(inst, branch)
    chosen = []
    taken = set()
    for _ in range(n_reg):
        pool = [o for o in offers if o[2] == 0 and o[0] not in taken]
        if not pool:
            continue
        pick = min(pool, key=lambda o: bkey(o[0]))
        chosen.append(pick)
        taken.add(pick[0])
    for _ in range(n_flex):
        pool = [o for o in offers if o[0] not in taken]
        if not pool:
            continue
        pick = min(pool, key=lambda o: skey((o[0], o[2])))
        chosen.append(pick)
        taken.add(pick[0])
    return set(chosen)


# ---------------------------------------------------------------------------
# Choice-rule condition checkers (full powerset scan)
# ---------------------------------------------------------------------------

MAX_UNIVERSE = 12


def check_choice_conditions(rule, universe):
    """Scan the full powerset of a contract universe (at most 12 contracts)
    and report whether the choice rule satisfies substitutability,
    unilateral substitutability, independence of rejected contracts, and
    the law of aggregate demand, with counterexamples on failure."""
    universe = sorted(universe)
    if len(universe) > MAX_UNIVERSE:
        raise CapExceeded("universe of %d contracts exceeds the %d-contract "
                          "powerset cap" % (len(universe), MAX_UNIVERSE))
    subsets = []
    for r in range(len(universe) + 1):
        subsets.extend(frozenset(c) for c in combinations(universe, r))
    choice = {s: frozenset(rule(s)) for s in subsets}
    report = {
        "substitutable": {"holds": True, "witness": None},
        "unilaterally_substitutable": {"holds": True, "witness": None},
        "irc": {"holds": True, "witness": None},
        "lad": {"holds": True, "witness": None},
    }
    for big in subsets:
        chosen_big = choice[big]
        big_sorted = sorted(big)
        smalls = []
        for r in range(len(big_sorted)):
            smalls.extend(frozenset(c) for c in combinations(big_sorted, r))
        for small in smalls:
            chosen_small = choice[small]
            # LAD: expanding the available set weakly increases the number
            # of contracts selected.
            if report["lad"]["holds"] and len(chosen_big) < len(chosen_small):
                report["lad"] = {"holds": False, "witness": {
                    "smaller": sorted(small), "larger": sorted(big),
                    "chosen_smaller": sorted(chosen_small),
                    "chosen_larger": sorted(chosen_big)}}
            # IRC: removing one unselected contract leaves the choice intact.
            if report["irc"]["holds"] and len(big) - len(small) == 1 \
                    and chosen_big <= small and chosen_small != chosen_big:
                report["irc"] = {"holds": False, "witness": {
                    "set": sorted(big), "subset": sorted(small),
                    "chosen_set": sorted(chosen_big),
                    "chosen_subset": sorted(chosen_small)}}
            for x in chosen_big & small:
                # Substitutability: a chosen contract stays chosen after
                # removing other contracts.
                if report["substitutable"]["holds"] and x not in chosen_small:
                    report["substitutable"] = {"holds": False, "witness": {
                        "contract": x, "set": sorted(big),
                        "subset": sorted(small),
                        "chosen_subset": sorted(chosen_small)}}
                # Unilateral substitutability: the same, but only when the
                # contract is its cadet's only contract in the larger set.
                if report["unilaterally_substitutable"]["holds"] \
                        and x not in chosen_small \
                        and sum(1 for c in big if c[0] == x[0]) == 1:
                    report["unilaterally_substitutable"] = {
                        "holds": False, "witness": {
                            "contract": x, "set": sorted(big),
                            "subset": sorted(small),
                            "chosen_subset": sorted(chosen_small)}}
    return report


# ---------------------------------------------------------------------------
# Cumulative offer process
# ---------------------------------------------------------------------------

def cumulative_offer(inst, rules=None, proposer_order=None):
    """Sequential cumulative offer process: the highest-base-priority cadet
    with no contract on hold proposes their most-preferred not-yet-proposed
    contract; the branch re-chooses from every offer it has ever received.
    Aborts if a branch ever re-holds a contract it had already rejected
    while its cadet moved on (a sign the choice rules violate the
    conditions the process relies on)."""
    prefs = cadet_preferences(inst)
    if rules is None:
        rules = {b: (lambda offers, b=b: slot_choice(inst, b, offers))
                 for b in inst["branches"]}
    order = list(inst["oml"] if proposer_order is None else proposer_order)
    pointer = {c: 0 for c in prefs}
    offers = {b: set() for b in inst["branches"]}
    held = {b: set() for b in inst["branches"]}
    trace = []
    while True:
        holding = {ct[0] for b in held for ct in held[b]}
        proposer = next((c for c in order
                         if c not in holding and pointer[c] < len(prefs[c])),
                        None)
        if proposer is None:
            break
        b, t = prefs[proposer][pointer[proposer]]
        pointer[proposer] += 1
        ct = (proposer, b, t)
        previously_rejected = {c for c in offers[b] - held[b]}
        offers[b].add(ct)
        new_held = set(rules[b](offers[b]))
        resurrected = (new_held & previously_rejected) - {ct}
        if resurrected:
            raise MechanismError(
                "branch %r re-held previously rejected contracts %s; the "
                "choice rule violates the conditions the cumulative offer "
                "process requires" % (b, sorted(resurrected)))
        trace.append({"event": "propose", "cadet": proposer,
                      "contract": [b, t],
                      "held": sorted((c[0], c[2]) for c in new_held)})
        held[b] = new_held
    alloc = {c: None for c in prefs}
    for b in held:
        for (c, _b, t) in held[b]:
            alloc[c] = (b, t)
    return {"allocation": alloc, "trace": trace}


def mpco(inst):
    """Multi-price cumulative offer mechanism: the cumulative offer process
    run on the instance's slot-based branch choice rules (regular slots by
    base priority, flexible slots by the price-responsiveness scheme)."""
    return cumulative_offer(inst)


# ---------------------------------------------------------------------------
# Two-criteria sequential mechanism (branch ranking + volunteer flags)
# ---------------------------------------------------------------------------

def usma2006(inst):
    """The two-criteria sequential mechanism: cadets submit a branch
    ranking and a set of branches where they volunteer to pay the elevated
    price.  In a first pass over cadets in base-priority order, each cadet
    takes their best-ranked branch with a regular position free, or with a
    flexible position free if they volunteered there (charged the elevated
    price).  Unfilled flexible positions are then awarded at the base price
    to the remaining cadets in a second pass.

    Within the flexible positions this realizes volunteers-first-then-
    base-priority; volunteers are charged whenever they receive a flexible
    position, even when it would have gone to them at the base price."""
    for c, spec in inst["cadets"].items():
        if not (isinstance(spec, dict) and "ranking" in spec):
            raise MechanismError(
                "usma2006 needs branch rankings plus volunteer sets")
    if len(inst.get("price_ladder", ["base"])) > 2:
        raise MechanismError("usma2006 supports exactly two price tiers")
    reg = {b: spec["capacity"] - spec.get("flexible", 0)
           for b, spec in inst["branches"].items()}
    flex = {b: spec.get("flexible", 0) for b, spec in inst["branches"].items()}
    alloc = {c: None for c in inst["cadets"]}
    trace = []
    for c in inst["oml"]:
        spec = inst["cadets"][c]
        bradso = set(spec.get("bradso", []))
        for b in spec["ranking"]:
            if reg[b] > 0:
                reg[b] -= 1
                alloc[c] = (b, 0)
                trace.append({"event": "assign", "pass": 1, "cadet": c,
                              "branch": b, "tier": 0})
                break
            if b in bradso and flex[b] > 0:
                flex[b] -= 1
                alloc[c] = (b, 1)
                trace.append({"event": "assign", "pass": 1, "cadet": c,
                              "branch": b, "tier": 1, "volunteered": True})
                break
    for c in inst["oml"]:
        if alloc[c] is not None:
            continue
        for b in inst["cadets"][c]["ranking"]:
            if flex[b] > 0:
                flex[b] -= 1
                alloc[c] = (b, 0)
                trace.append({"event": "assign", "pass": 2, "cadet": c,
                              "branch": b, "tier": 0})
                break
    return {"allocation": alloc, "trace": trace}
