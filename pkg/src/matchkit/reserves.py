"""Reserve-system choice rules: precedence-sequence allocation, the
court-mandated rule that excludes protected-category candidates from open
horizontal protections, its minimum-guarantee correction, the meritorious-
horizontal rule for overlapping protections, their two-step compositions,
and the multi-institution deferred-acceptance wrapper.

Applicants carry an integer merit ``score``, a vertical category ``vr``
("general" when none) and a list of horizontal traits ``hr``.  Horizontal
protections are honored one-to-one: each reserved slot is credited to at
most one beneficiary and each beneficiary credits at most one slot.
"""

from __future__ import annotations

from .core import MechanismError


def _score(applicants, a):
    return applicants[a]["score"]


def _by_merit(applicants, pool):
    return sorted(pool, key=lambda a: -_score(applicants, a))


def _has_trait(spec, trait):
    return trait in spec.get("hr", []) or spec.get("vr", "general") == trait


# ---------------------------------------------------------------------------
# Horizontal matching (one-to-one honoring of HR slots)
# ---------------------------------------------------------------------------

def hr_slots(hr_reserves):
    """Expand {trait: count} into a list of (trait, copy-index) slots."""
    out = []
    for t in sorted(hr_reserves):
        out.extend((t, i) for i in range(hr_reserves[t]))
    return out


def max_hr_matching(applicants, pool, hr_reserves):
    """Maximum one-to-one matching between the given applicants and HR
    slots via augmenting paths.  Returns (size, {applicant: slot})."""
    slots = hr_slots(hr_reserves)
    slot_of = {}
    match = {}

    def augment(a, visited):
        for s in slots:
            if s in visited or not _has_trait(applicants[a], s[0]):
                continue
            visited.add(s)
            if s not in slot_of or augment(slot_of[s], visited):
                slot_of[s] = a
                match[a] = s
                return True
        return False

    size = 0
    for a in _by_merit(applicants, pool):
        if augment(a, set()):
            size += 1
    return size, match


# ---------------------------------------------------------------------------
# Sequential slot allocation over a precedence order
# ---------------------------------------------------------------------------

def reserve_sequence_choice(applicants, slots):
    """Fill slots one at a time in precedence order; each slot goes to the
    highest-merit unassigned applicant eligible for it (everyone is
    eligible for open slots, trait holders for reserved ones).  Returns
    ``{"allocation": {applicant: slot-label or None}}``."""
    alloc = {a: None for a in applicants}
    unassigned = set(applicants)
    trace = []
    for slot in slots:
        if slot["type"] == "open":
            pool = unassigned
            label = "open"
        else:
            trait = slot["trait"]
            pool = {a for a in unassigned if _has_trait(applicants[a], trait)}
            label = trait
        ordered = _by_merit(applicants, pool)
        if not ordered:
            trace.append({"event": "slot", "label": label, "filled_by": None})
            continue
        pick = ordered[0]
        alloc[pick] = label
        unassigned.discard(pick)
        trace.append({"event": "slot", "label": label, "filled_by": pick})
    return {"allocation": alloc, "trace": trace}


def precedence_slots(n_open, reserves, order="over-and-above"):
    """Build a slot sequence for one open block plus reserved blocks.
    ``order`` is over-and-above (open first), minimum-guarantee (reserved
    first), or compromise (half of each reserve, then open, then the
    remaining reserve)."""
    open_slots = [{"type": "open"}] * n_open
    res = [{"type": "reserved", "trait": t}
           for t in sorted(reserves) for _ in range(reserves[t])]
    if order == "over-and-above":
        return open_slots + res
    if order == "minimum-guarantee":
        return res + open_slots
    if order == "compromise":
        first, second = [], []
        for t in sorted(reserves):
            half = reserves[t] // 2
            first.extend([{"type": "reserved", "trait": t}] * half)
            second.extend([{"type": "reserved", "trait": t}] * (reserves[t] - half))
        return first + open_slots + second
    raise MechanismError("unknown precedence order %r" % order)


# ---------------------------------------------------------------------------
# Single-category choice rules with horizontal reserves
# ---------------------------------------------------------------------------

def minimum_guarantee_choice(applicants, pool, capacity, hr_reserves,
                             trait_filter=None):
    """Minimum-guarantee rule: HR-reserved slots are processed before the
    open-merit slots.  Returns {applicant: label} for the chosen set."""
    chosen = {}
    unassigned = set(pool)
    for t in sorted(hr_reserves):
        for _ in range(hr_reserves[t]):
            cands = [a for a in unassigned if _has_trait(applicants[a], t)]
            if trait_filter is not None:
                cands = [a for a in cands if trait_filter(a, t)]
            ordered = _by_merit(applicants, cands)
            if ordered:
                chosen[ordered[0]] = t
                unassigned.discard(ordered[0])
    n_open = capacity - len(chosen)
    for a in _by_merit(applicants, unassigned)[:n_open]:
        chosen[a] = "open"
    return chosen


def meritorious_horizontal_choice(applicants, pool, capacity, hr_reserves):
    """Meritorious-horizontal rule for (possibly overlapping) HR traits:
    honor the maximum number m* of HR slots; pick the beneficiaries
    greedily by merit subject to staying extendable to an m*-honoring
    assignment; fill the remaining capacity by merit."""
    m_star, _ = max_hr_matching(applicants, pool, hr_reserves)
    beneficiaries = []
    for a in _by_merit(applicants, pool):
        if len(beneficiaries) == m_star:
            break
        size, _ = max_hr_matching(applicants, beneficiaries + [a], hr_reserves)
        if size == len(beneficiaries) + 1:
            beneficiaries.append(a)
    _, match = max_hr_matching(applicants, beneficiaries, hr_reserves)
    chosen = {a: match[a][0] for a in beneficiaries}
    rest = [a for a in _by_merit(applicants, pool) if a not in chosen]
    for a in rest[:capacity - len(chosen)]:
        chosen[a] = "open"
    return chosen


# ---------------------------------------------------------------------------
# Court-mandated rule and its corrections (two-step compositions)
# ---------------------------------------------------------------------------

def _adjust_for_hr(applicants, tentative, pool, hr_reserves, incoming_ok):
    """Horizontal adjustment pass (non-overlapping traits): while a trait's
    count among the tentative holders falls short of its reserve, replace
    the lowest-merit holder not needed for any other trait's reserve with
    the highest-merit eligible outsider holding the deficient trait.
    ``incoming_ok(a, trait)`` restricts who may come in (the court-mandated
    rule restricts open-category adjustments to general-category
    candidates)."""
    tentative = list(tentative)

    def count(t, members):
        return sum(1 for a in members if _has_trait(applicants[a], t))

    for t in sorted(hr_reserves):
        while count(t, tentative) < hr_reserves[t]:
            outside = [a for a in pool
                       if a not in tentative
                       and _has_trait(applicants[a], t)
                       and incoming_ok(a, t)]
            if not outside:
                break
            # a holder is removable if dropping them keeps every other
            # trait's reserve satisfied as well as it was before
            removable = [a for a in tentative
                         if not _has_trait(applicants[a], t)
                         and all(count(u, tentative) > hr_reserves[u]
                                 or not _has_trait(applicants[a], u)
                                 for u in hr_reserves if u != t)]
            if not removable:
                break
            outgoing = _by_merit(applicants, removable)[-1]
            incoming = _by_merit(applicants, outside)[0]
            tentative = [x for x in tentative if x != outgoing] + [incoming]
    return tentative


def sci_akg_choice(inst):
    """The court-mandated two-step rule: open positions go by pure merit,
    then a horizontal adjustment restricted to general-category candidates;
    each vertical category is then filled by merit over its remaining
    members with its own (unrestricted) horizontal adjustment.  Protected-
    category candidates are thereby shut out of open horizontal slots."""
    return _two_step(inst, open_general_only=True)


def tsmg_choice(inst):
    """Two-step minimum guarantee: the open category is cleared with the
    minimum-guarantee rule over all applicants, then every vertical
    category is cleared with the minimum-guarantee rule over its remaining
    members."""
    applicants = inst["applicants"]
    cats = inst["categories"]
    alloc = {a: None for a in applicants}
    open_spec = cats["open"]
    chosen = minimum_guarantee_choice(applicants, set(applicants),
                                      open_spec["capacity"],
                                      open_spec.get("hr_reserves", {}))
    for a, label in chosen.items():
        alloc[a] = ("open", label)
    for v in sorted(c for c in cats if c != "open"):
        members = {a for a in applicants
                   if alloc[a] is None and applicants[a].get("vr") == v}
        spec = cats[v]
        chosen = minimum_guarantee_choice(applicants, members,
                                          spec["capacity"],
                                          spec.get("hr_reserves", {}))
        for a, label in chosen.items():
            alloc[a] = (v, label)
    return {"allocation": alloc, "trace": []}


def _two_step(inst, open_general_only):
    applicants = inst["applicants"]
    cats = inst["categories"]
    alloc = {a: None for a in applicants}
    open_spec = cats["open"]
    pool = set(applicants)
    tentative = _by_merit(applicants, pool)[:open_spec["capacity"]]
    if open_general_only:
        ok = lambda a, t: applicants[a].get("vr", "general") == "general"
    else:
        ok = lambda a, t: True
    tentative = _adjust_for_hr(applicants, tentative, pool,
                               open_spec.get("hr_reserves", {}), ok)
    _, match = max_hr_matching(applicants, tentative,
                               open_spec.get("hr_reserves", {}))
    for a in tentative:
        alloc[a] = ("open", match[a][0] if a in match else "open")
    for v in sorted(c for c in cats if c != "open"):
        members = {a for a in applicants
                   if alloc[a] is None and applicants[a].get("vr") == v}
        spec = cats[v]
        tent = _by_merit(applicants, members)[:spec["capacity"]]
        tent = _adjust_for_hr(applicants, tent, members,
                              spec.get("hr_reserves", {}), lambda a, t: True)
        _, match = max_hr_matching(applicants, tent,
                                   spec.get("hr_reserves", {}))
        for a in tent:
            alloc[a] = (v, match[a][0] if a in match else "open")
    return {"allocation": alloc, "trace": []}


def tsmh_choice(inst):
    """Two-step meritorious horizontal: the open category is cleared with
    the meritorious-horizontal rule over all applicants, then every
    vertical category over its remaining members."""
    applicants = inst["applicants"]
    cats = inst["categories"]
    alloc = {a: None for a in applicants}
    open_spec = cats["open"]
    chosen = meritorious_horizontal_choice(applicants, set(applicants),
                                           open_spec["capacity"],
                                           open_spec.get("hr_reserves", {}))
    for a, label in chosen.items():
        alloc[a] = ("open", label)
    for v in sorted(c for c in cats if c != "open"):
        members = {a for a in applicants
                   if alloc[a] is None and applicants[a].get("vr") == v}
        spec = cats[v]
        chosen = meritorious_horizontal_choice(applicants, members,
                                               spec["capacity"],
                                               spec.get("hr_reserves", {}))
        for a, label in chosen.items():
            alloc[a] = (v, label)
    return {"allocation": alloc, "trace": []}


def institution_choice(inst, institution, pool):
    """An institution's choice from an applicant pool: the two-step
    meritorious-horizontal rule run on the sub-instance."""
    sub = {"applicants": {a: inst["applicants"][a] for a in pool},
           "categories": inst["institutions"][institution]["categories"]}
    result = tsmh_choice(sub)
    return {a: v for a, v in result["allocation"].items() if v is not None}


def tsmh_da(inst):
    """Multi-institution mechanism: applicant-proposing deferred acceptance
    where each institution chooses from its cumulative applicant pool with
    the two-step meritorious-horizontal rule."""
    applicants = inst["applicants"]
    prefs = {a: list(applicants[a].get("preferences", []))
             for a in applicants}
    pointer = {a: 0 for a in applicants}
    offers = {i: set() for i in inst["institutions"]}
    held = {i: {} for i in inst["institutions"]}
    order = _by_merit(applicants, applicants)
    trace = []
    while True:
        holding = {a for i in held for a in held[i]}
        proposer = next((a for a in order
                         if a not in holding and pointer[a] < len(prefs[a])),
                        None)
        if proposer is None:
            break
        i = prefs[proposer][pointer[proposer]]
        pointer[proposer] += 1
        offers[i].add(proposer)
        held[i] = institution_choice(inst, i, offers[i])
        trace.append({"event": "propose", "applicant": proposer,
                      "institution": i, "held": sorted(held[i])})
    alloc = {a: None for a in applicants}
    for i in held:
        for a, (cat, label) in held[i].items():
            alloc[a] = (i, cat, label)
    return {"allocation": alloc, "trace": trace}
