"""School-choice and student-placement mechanisms: deferred acceptance in
both directions, the immediate-acceptance (Boston) mechanism, school-choice
top trading cycles, multi-category serial dictatorship over field rankings,
score-deduction mechanisms, and band-based parallel mechanisms.

All mechanisms take a validated two-sided instance dict and return
``{"allocation": {student: school|None}, "trace": [...]}``.
"""

from __future__ import annotations

from .core import MechanismError


def school_priority(inst, school):
    """The strict priority list of a school: explicit list, field ranking,
    or descending common exam scores."""
    spec = inst["schools"][school]
    if "priority" in spec:
        return list(spec["priority"])
    if spec.get("field") is not None:
        return list(inst["fields"][spec["field"]])
    scores = spec.get("scores") or inst.get("scores")
    if scores:
        return sorted(scores, key=lambda s: (-scores[s], s))
    raise MechanismError("school %r has no priority information" % school)


def _rank_maps(inst):
    """priority-rank lookup per school: lower rank = higher priority."""
    out = {}
    for c in inst["schools"]:
        out[c] = {s: i for i, s in enumerate(school_priority(inst, c))}
    return out


def _capacities(inst):
    return {c: inst["schools"][c]["capacity"] for c in inst["schools"]}


# ---------------------------------------------------------------------------
# Deferred acceptance
# ---------------------------------------------------------------------------

def _da_students_propose(students, schools_rank, caps):
    """Round-based student-proposing deferred acceptance.

    students: {student: ranking over schools};
    schools_rank: {school: {student: rank}} (absent student = unacceptable);
    caps: {school: capacity}.
    Returns (allocation, trace).
    """
    pointer = {s: 0 for s in students}
    held = {c: [] for c in caps}           # school -> list of students held
    assigned = {s: None for s in students}
    trace = []
    while True:
        proposals = {}
        for s in sorted(students):
            if assigned[s] is not None:
                continue
            ranking = students[s]
            while pointer[s] < len(ranking):
                c = ranking[pointer[s]]
                if s in schools_rank[c]:
                    proposals.setdefault(c, []).append(s)
                    break
                pointer[s] += 1
        if not proposals:
            break
        round_log = {"event": "round", "proposals": {}, "rejections": {}}
        for c, applicants in sorted(proposals.items()):
            pool = held[c] + applicants
            pool.sort(key=lambda s: schools_rank[c][s])
            keep = pool[:caps[c]]
            reject = pool[caps[c]:]
            held[c] = keep
            round_log["proposals"][c] = sorted(applicants)
            if reject:
                round_log["rejections"][c] = sorted(reject)
            for s in applicants:
                assigned[s] = c
            for s in reject:
                assigned[s] = None
                pointer[s] += 1
        trace.append(round_log)
    alloc = {s: None for s in students}
    for c, ss in held.items():
        for s in ss:
            alloc[s] = c
    return alloc, trace


def da_student(inst):
    """Student-proposing deferred acceptance: the student-optimal stable
    matching of the instance."""
    ranks = _rank_maps(inst)
    alloc, trace = _da_students_propose(inst["students"], ranks, _capacities(inst))
    return {"allocation": alloc, "trace": trace}


def da_college(inst):
    """College-proposing deferred acceptance: the college-optimal stable
    matching of the instance."""
    students = inst["students"]
    caps = _capacities(inst)
    pref_rank = {s: {c: i for i, c in enumerate(r)} for s, r in students.items()}
    prio = {c: [s for s in school_priority(inst, c) if c in pref_rank[s]]
            for c in inst["schools"]}
    pointer = {c: 0 for c in prio}         # next candidate index per school
    held = {s: None for s in students}     # student -> school held
    rejected = {c: set() for c in prio}
    trace = []
    while True:
        proposals = {}
        for c in sorted(prio):
            # propose to top remaining students until capacity offers stand
            standing = sum(1 for s in students if held[s] == c)
            while standing + len(proposals.get(c, [])) < caps[c] and pointer[c] < len(prio[c]):
                s = prio[c][pointer[c]]
                pointer[c] += 1
                if held[s] == c or s in rejected[c]:
                    continue
                proposals.setdefault(c, []).append(s)
        if not proposals:
            break
        round_log = {"event": "round", "proposals": proposals, "rejections": {}}
        offers = {}
        for c, ss in proposals.items():
            for s in ss:
                offers.setdefault(s, []).append(c)
        for s, cs in sorted(offers.items()):
            options = cs + ([held[s]] if held[s] is not None else [])
            best = min(options, key=lambda c: pref_rank[s][c])
            for c in options:
                if c != best:
                    rejected[c].add(s)
                    round_log["rejections"].setdefault(c, []).append(s)
            held[s] = best
        trace.append(round_log)
    alloc = {s: held[s] for s in students}
    return {"allocation": alloc, "trace": trace}


# ---------------------------------------------------------------------------
# Immediate acceptance (Boston)
# ---------------------------------------------------------------------------

def boston(inst):
    """Immediate-acceptance mechanism: round k permanently fills remaining
    seats with the students ranking the school k-th, in priority order."""
    students = inst["students"]
    ranks = _rank_maps(inst)
    seats = dict(_capacities(inst))
    alloc = {s: None for s in students}
    trace = []
    max_len = max((len(r) for r in students.values()), default=0)
    for k in range(max_len):
        round_log = {"event": "round", "choice_rank": k + 1, "admitted": {}}
        applicants = {}
        for s in sorted(students):
            if alloc[s] is None and k < len(students[s]):
                c = students[s][k]
                if s in ranks[c]:
                    applicants.setdefault(c, []).append(s)
        for c, ss in sorted(applicants.items()):
            ss.sort(key=lambda s: ranks[c][s])
            admitted = ss[:seats[c]]
            seats[c] -= len(admitted)
            for s in admitted:
                alloc[s] = c
            if admitted:
                round_log["admitted"][c] = admitted
        trace.append(round_log)
    return {"allocation": alloc, "trace": trace}


# ---------------------------------------------------------------------------
# School-choice top trading cycles
# ---------------------------------------------------------------------------

def sc_ttc(inst):
    """Top trading cycles over priorities: each unassigned student points
    at their most-preferred school with seats left, each such school points
    at its highest-priority unassigned student; all cycles clear each
    round and seats decrement."""
    students = inst["students"]
    prio = {c: school_priority(inst, c) for c in inst["schools"]}
    seats = dict(_capacities(inst))
    alloc = {}
    trace = []
    remaining = set(students)
    rounds = 0
    while remaining:
        rounds += 1
        target = {}
        for s in remaining:
            pick = next((c for c in students[s]
                         if seats[c] > 0 and s in set(prio[c])), None)
            if pick is None:
                alloc[s] = None
            else:
                target[s] = pick
        for s in set(remaining) - set(target):
            remaining.discard(s)
        if not target:
            break
        school_pick = {}
        for c in prio:
            if seats[c] <= 0:
                continue
            pick = next((s for s in prio[c] if s in remaining), None)
            if pick is not None:
                school_pick[c] = pick
        # Follow student -> school -> student pointers to find cycles.
        cleared = set()
        for start in sorted(target):
            if start in cleared:
                continue
            path, seen = [], {}
            s = start
            while s not in seen and s not in cleared:
                seen[s] = len(path)
                path.append(s)
                s = school_pick[target[s]]
            if s in seen:
                cycle = path[seen[s]:]
                cleared.update(cycle)
                for m in cycle:
                    alloc[m] = target[m]
                trace.append({"event": "cycle", "round": rounds,
                              "members": cycle,
                              "schools": [target[m] for m in cycle]})
        if not cleared:
            raise MechanismError("no cycle found; instance is malformed")
        for m in cleared:
            seats[target[m]] -= 1
            remaining.discard(m)
    for s in students:
        alloc.setdefault(s, None)
    return {"allocation": alloc, "trace": trace}


# ---------------------------------------------------------------------------
# Multi-category serial dictatorship over field rankings
# ---------------------------------------------------------------------------

def mcsd(inst):
    """Iterated per-field serial dictatorship: every field runs a serial
    dictatorship over its own schools in parallel; each student holding
    several tentative seats truncates their ranking strictly below the best
    one; repeat until no student holds more than one seat."""
    students = inst["students"]
    schools = inst["schools"]
    fields = {}
    for c, spec in schools.items():
        f = spec.get("field")
        if f is None:
            raise MechanismError("mcsd requires every school to have a field")
        fields.setdefault(f, []).append(c)
    field_rank = {f: list(inst["fields"][f]) for f in fields}
    effective = {s: list(r) for s, r in students.items()}
    trace = []
    for iteration in range(1, 10_000):
        tentative = {s: [] for s in students}
        for f in sorted(fields):
            seats = {c: schools[c]["capacity"] for c in fields[f]}
            taken = set()
            for s in field_rank[f]:
                if s in taken:
                    continue
                pick = next((c for c in effective[s]
                             if c in seats and seats[c] > 0), None)
                if pick is not None:
                    seats[pick] -= 1
                    tentative[s].append(pick)
                    taken.add(s)
        trace.append({"event": "iteration", "number": iteration,
                      "tentative": {s: list(v) for s, v in tentative.items()}})
        multi = [s for s in students if len(tentative[s]) > 1]
        if not multi:
            alloc = {s: (tentative[s][0] if tentative[s] else None)
                     for s in students}
            return {"allocation": alloc, "trace": trace}
        for s in multi:
            best = min(tentative[s], key=lambda c: effective[s].index(c))
            cut = effective[s].index(best)
            effective[s] = effective[s][:cut + 1]
    raise MechanismError("mcsd failed to terminate")


# ---------------------------------------------------------------------------
# Score-adjusted deferred acceptance variants
# ---------------------------------------------------------------------------

def _adjusted_da(inst, effective_score):
    """Run student-proposing DA on per-(student, school) effective scores;
    ties broken by baseline score (descending) then student id."""
    students = inst["students"]
    scores = inst["scores"]
    schools_rank = {}
    for c in inst["schools"]:
        listers = [s for s in students if c in students[s]]
        listers.sort(key=lambda s: (-effective_score(s, c), -scores[s], s))
        schools_rank[c] = {s: i for i, s in enumerate(listers)}
    return _da_students_propose(students, schools_rank, _capacities(inst))


def taiwan_deduction(inst, rule):
    """Deduction mechanism: a student's effective score at their k-th
    ranked school is their exam score minus rule[k-1]; then student-
    proposing DA on the adjusted priorities.  ``rule`` must be a weakly
    increasing integer sequence starting at 0."""
    if not rule or rule[0] != 0 or any(a > b for a, b in zip(rule, rule[1:])) \
            or any(not isinstance(x, int) or x < 0 for x in rule):
        raise MechanismError("deduction rule must be weakly increasing "
                             "non-negative integers starting at 0")
    students = inst["students"]
    longest = max((len(r) for r in students.values()), default=0)
    if len(rule) < longest:
        raise MechanismError("deduction rule shorter than the longest "
                             "submitted preference list")
    scores = inst["scores"]
    pos = {s: {c: k for k, c in enumerate(r)} for s, r in students.items()}

    def eff(s, c):
        return scores[s] - rule[pos[s][c]]

    alloc, trace = _adjusted_da(inst, eff)
    return {"allocation": alloc, "trace": trace}


def parallel_mechanism(inst, bands):
    """Band-based mechanism: schools prioritize first by the band index in
    which a student ranks them, then by exam score; then student-proposing
    DA on the adjusted priorities.  A single all-covering band reduces to
    deferred acceptance; all-singleton bands reduce to the immediate-
    acceptance mechanism."""
    if not bands or any(not isinstance(b, int) or b < 1 for b in bands):
        raise MechanismError("bands must be positive integers")
    students = inst["students"]
    longest = max((len(r) for r in students.values()), default=0)
    if sum(bands) < longest:
        raise MechanismError("bands do not cover the longest submitted list")
    starts = []
    acc = 0
    for b in bands:
        starts.append(acc)
        acc += b

    def band_of(k):
        for i in range(len(starts) - 1, -1, -1):
            if k >= starts[i]:
                return i
        return 0

    scores = inst["scores"]
    span = max(scores.values()) - min(scores.values()) + 1
    pos = {s: {c: k for k, c in enumerate(r)} for s, r in students.items()}

    def eff(s, c):
        return -band_of(pos[s][c]) * span + scores[s]

    alloc, trace = _adjusted_da(inst, eff)
    return {"allocation": alloc, "trace": trace}
