"""Housing-allocation mechanisms: serial dictatorships, squatting rights,
top-trading-cycles on pure housing markets, the queue-based
request-and-promote mechanism, and the core-based technocratic mechanism.

All mechanisms take a validated one-sided instance dict (see core.py) and
return ``{"allocation": {agent: house|None}, "trace": [...]}``.
"""

from __future__ import annotations

from .core import MechanismError, shuffled


def _houses(inst):
    return list(inst.get("tenants", {}).values()) + list(inst.get("vacant_houses", []))


def _agents(inst):
    return list(inst.get("tenants", {})) + list(inst.get("newcomers", []))


# ---------------------------------------------------------------------------
# Serial dictatorships
# ---------------------------------------------------------------------------

def ssd(inst, queue=None):
    """Simple serial dictatorship: agents pick their top remaining
    acceptable house in queue order; endowments are ignored."""
    prefs = inst["preferences"]
    queue = list(inst["queue"] if queue is None else queue)
    available = set(_houses(inst))
    alloc = {}
    trace = []
    for agent in queue:
        pick = next((h for h in prefs[agent] if h in available), None)
        alloc[agent] = pick
        if pick is not None:
            available.discard(pick)
        trace.append({"event": "pick", "agent": agent, "house": pick})
    return {"allocation": alloc, "trace": trace}


def rsd(inst, seed):
    """Random serial dictatorship: the queue is a seeded uniform shuffle of
    the agents, then ssd."""
    queue = shuffled(sorted(_agents(inst)), seed)
    result = ssd(inst, queue=queue)
    result["trace"].insert(0, {"event": "queue", "queue": queue, "seed": seed})
    return result


def ssd_with_squatting_rights(inst, optin=None):
    """Tenants choose to keep their current house (squat) or enter the
    market; squatters keep their endowments, entrants' houses join the
    vacant pool, and everyone else is cleared by ssd in queue order."""
    optin = optin if optin is not None else inst.get("optin", {})
    tenants = inst.get("tenants", {})
    for t in tenants:
        if t not in optin:
            raise MechanismError("opt-in profile missing tenant %r" % t)
    alloc = {}
    trace = []
    squatters = [t for t in tenants if not optin[t]]
    for t in squatters:
        alloc[t] = tenants[t]
        trace.append({"event": "squat", "agent": t, "house": tenants[t]})
    taken = {tenants[t] for t in squatters}
    available = set(_houses(inst)) - taken
    prefs = inst["preferences"]
    for agent in inst["queue"]:
        if agent in alloc:
            continue
        pick = next((h for h in prefs[agent] if h in available), None)
        alloc[agent] = pick
        if pick is not None:
            available.discard(pick)
        trace.append({"event": "pick", "agent": agent, "house": pick})
    return {"allocation": alloc, "trace": trace}


# ---------------------------------------------------------------------------
# Top trading cycles on a pure housing market
# ---------------------------------------------------------------------------

def gttc(inst):
    """Top-trading-cycles for a market of endowed agents only.  Every
    remaining agent points at the owner of their most-preferred remaining
    house (falling back to their own house if nothing acceptable remains);
    all cycles clear each round.  Output is the unique core allocation
    under strict preferences."""
    endow = dict(inst["tenants"])
    if inst.get("newcomers") or inst.get("vacant_houses"):
        raise MechanismError("gttc requires a pure housing market")
    return _gttc_market(endow, inst["preferences"])


def _gttc_market(endow, prefs):
    owner = {h: a for a, h in endow.items()}
    remaining = set(endow)
    available = set(endow.values())
    alloc = {}
    trace = []
    rounds = 0
    while remaining:
        rounds += 1
        # Each remaining agent points at their top remaining house.
        target = {}
        for a in remaining:
            pick = next((h for h in prefs.get(a, []) if h in available), endow[a])
            target[a] = pick
        # Follow pointers to find cycles; every agent on a cycle clears.
        on_cycle = set()
        for start in sorted(remaining):
            if start in on_cycle:
                continue
            path, seen = [], {}
            a = start
            while a not in seen and a not in on_cycle:
                seen[a] = len(path)
                path.append(a)
                a = owner[target[a]]
            if a in seen:  # cycle found within this walk
                cycle = path[seen[a]:]
                on_cycle.update(cycle)
                for m in cycle:
                    alloc[m] = target[m]
                trace.append({"event": "cycle", "round": rounds,
                              "members": cycle,
                              "houses": [target[m] for m in cycle]})
        if not on_cycle:  # cannot happen in a finite functional graph
            raise MechanismError("no cycle found; market is malformed")
        remaining -= on_cycle
        available -= {alloc[m] for m in on_cycle}
    return {"allocation": alloc, "trace": trace}


# ---------------------------------------------------------------------------
# Queue-based request-and-promote mechanism (tenants + newcomers + vacants)
# ---------------------------------------------------------------------------

def yrmh_igyt(inst, queue=None):
    """Mixed-market mechanism: the queue head requests their top remaining
    house.  If that house is held by an unassigned tenant, the tenant is
    promoted to just ahead of the requester and becomes the new requester;
    a request closing back into the current request chain clears as a
    cycle; a request for an unheld house clears the whole chain."""
    tenants = dict(inst.get("tenants", {}))
    prefs = inst["preferences"]
    queue = list(inst["queue"] if queue is None else queue)
    assigned_houses = set()
    alloc = {}
    trace = []
    chain = []      # agents currently in the request chain, head first
    requests = []   # requests[i] = house requested by chain[i]

    def next_head():
        for a in queue:
            if a not in alloc and a not in chain:
                return a
        return None

    while True:
        if not chain:
            head = next_head()
            if head is None:
                break
            chain, requests = [head], [None]
        requester = chain[-1]
        wanted = next((h for h in prefs[requester]
                       if h not in assigned_houses), None)
        requests[-1] = wanted
        trace.append({"event": "request", "agent": requester, "house": wanted})
        if wanted is None:
            # Only a chain-starting newcomer can run out of options.
            alloc[requester] = None
            chain.pop()
            requests.pop()
            continue
        holder = next((t for t, h in tenants.items()
                       if h == wanted and t not in alloc), None)
        if holder is None:
            # The house is free (vacant, or already vacated): the whole
            # chain clears atomically.
            for agent, house in zip(chain, requests):
                alloc[agent] = house
                assigned_houses.add(house)
            trace.append({"event": "chain", "members": list(chain),
                          "houses": list(requests)})
            chain, requests = [], []
        elif holder in chain:
            # The request closes a cycle within the chain: the cycle
            # clears, the prefix of the chain persists.
            i = chain.index(holder)
            cycle, cycle_req = chain[i:], requests[i:]
            for agent, house in zip(cycle, cycle_req):
                alloc[agent] = house
                assigned_houses.add(house)
            trace.append({"event": "cycle", "members": cycle,
                          "houses": cycle_req})
            chain, requests = chain[:i], requests[:i]
        else:
            # Promote the holder to just ahead of the requester.
            chain.append(holder)
            requests.append(None)
            trace.append({"event": "promotion", "agent": holder,
                          "ahead_of": requester})
    return {"allocation": alloc, "trace": trace}


# ---------------------------------------------------------------------------
# Core-based technocratic mechanism
# ---------------------------------------------------------------------------

def technocratic_core(inst, seed):
    """Endow vacant houses to newcomers (seeded uniform newcomer order;
    each endowment is the free house that the newcomer's request chain
    terminates at), leave surplus newcomers unendowed and unmatched, then
    clear the induced pure housing market with top trading cycles."""
    newcomers = sorted(inst.get("newcomers", []))
    vacants = list(inst.get("vacant_houses", []))
    if len(newcomers) < len(vacants):
        raise MechanismError(
            "technocratic mechanism needs at least as many newcomers as "
            "vacant houses (%d < %d)" % (len(newcomers), len(vacants)))
    order = shuffled(newcomers, seed)
    # Determine which free house each newcomer's request chain consumes by
    # simulating the queue dynamics with newcomers first.
    sim_queue = order + sorted(inst.get("tenants", {}))
    sim = yrmh_igyt(inst, queue=sim_queue)
    endowment = {}
    for ev in sim["trace"]:
        if ev["event"] == "chain" and ev["members"]:
            head = ev["members"][0]
            if head in set(newcomers):
                endowment[head] = ev["houses"][-1]
    trace = [{"event": "endow", "newcomer": n, "house": h}
             for n, h in endowment.items()]
    market_endow = dict(inst.get("tenants", {}))
    market_endow.update(endowment)
    prefs = inst["preferences"]
    result = _gttc_market(market_endow, prefs)
    alloc = result["allocation"]
    for n in newcomers:
        if n not in alloc:
            alloc[n] = None
    # An endowed newcomer may "keep" an unacceptable endowment through the
    # self-pointing fallback; treat an assignment absent from the agent's
    # ranking as unmatched (the endowment was only a trading asset).
    for n in newcomers:
        if alloc[n] is not None and alloc[n] not in prefs[n]:
            alloc[n] = None
    return {"allocation": alloc, "trace": trace + result["trace"]}
