"""Shared fixtures: the worked running example (exact-count and real-data
variants) and a generator for small random networks."""

from __future__ import annotations

import random
from typing import Optional

from starbloom.bloom import BloomParams, ExactBitset, SPBF
from starbloom.fragments import fragment_by_cs
from starbloom.index import SPBFIndex, SPBFSlice
from starbloom.model import Query, StarPattern, Triple, Variable, iri, star_decompose
from starbloom.netsim import Network, NetworkConfig, network_from_layout, place_fragments
from starbloom.ntriples import parse_ntriples
from starbloom.sparql import parse_query

DBO = "http://dbpedia.org/ontology/"
NAT = DBO + "nationality"
AUTH = DBO + "author"
DEATH = DBO + "deathDate"
CAP = DBO + "capital"
CUR = DBO + "currency"
POP = DBO + "population"
PUB = DBO + "publisher"
LANG = DBO + "language"

RUNNING_QUERY = """\
PREFIX dbo: <http://dbpedia.org/ontology/>
SELECT * WHERE {
  ?person dbo:nationality ?country .
  ?person dbo:author ?publication .
  ?country dbo:capital ?capital .
  ?country dbo:currency ?currency .
  ?publication dbo:publisher ?publisher .
  ?publication dbo:language ?language .
}
"""

RUNNING_QUERY_DISTINCT = RUNNING_QUERY.replace("SELECT *", "SELECT DISTINCT *")

# fragment -> characteristic set of the running example
RUNNING_CS = {
    "f1": (AUTH, DEATH, NAT),
    "f2": (AUTH, NAT),
    "f3": (CAP, CUR, POP),
    "f4": (CAP, CUR),
    "f5": (LANG, PUB),
}

# fragment -> holder nodes; n5 replicates f2/f4/f5, joins co-locate on n2/n3
RUNNING_ALLOCATION = {
    "f1": ("n2", "n4"),
    "f2": ("n3", "n5"),
    "f3": ("n3", "n4"),
    "f4": ("n2", "n5"),
    "f5": ("n1", "n5"),
}

# ring topology; n5's neighbors are n2 and n4
RUNNING_TOPOLOGY = {
    "n1": ("n2", "n3"),
    "n2": ("n1", "n5"),
    "n3": ("n1", "n4"),
    "n4": ("n3", "n5"),
    "n5": ("n2", "n4"),
}


def _bag(prefix: str, size: int, shared: tuple[str, ...] = ()) -> ExactBitset:
    items = set(shared)
    i = 0
    while len(items) < size:
        items.add(f"{prefix}{i}")
        i += 1
    return ExactBitset(items)


def exact_running_spbfs() -> dict[str, SPBF]:
    """Star filters whose exact counts equal the running example's published
    cardinality table, including the pairwise intersections."""
    f4_subjects = tuple(f"c{i}" for i in range(200))
    f3_subjects = tuple(f"d{i}" for i in range(100))
    f5_subjects = tuple(f"p{i}" for i in range(8000))
    return {
        "f1": SPBF(tuple(sorted(RUNNING_CS["f1"])), _bag("s1_", 1000), {
            NAT: _bag("x1_", 1000, f4_subjects[:50]),     # |∩ f4 subjects| = 50, f3 = 0
            AUTH: _bag("y1_", 5000, f5_subjects[:500]),   # |∩ f5 subjects| = 500
            DEATH: _bag("z1_", 1000),
        }),
        "f2": SPBF(tuple(sorted(RUNNING_CS["f2"])), _bag("s2_", 2000), {
            NAT: _bag("x2_", 2000, f3_subjects),          # |∩ f3 subjects| = 100, f4 = 0
            AUTH: _bag("y2_", 3000, f5_subjects[500:1500]),
        }),
        "f3": SPBF(tuple(sorted(RUNNING_CS["f3"])), ExactBitset(f3_subjects), {
            CAP: _bag("g3_", 100), CUR: _bag("h3_", 150), POP: _bag("i3_", 100),
        }),
        "f4": SPBF(tuple(sorted(RUNNING_CS["f4"])), ExactBitset(f4_subjects), {
            CAP: _bag("g4_", 200), CUR: _bag("h4_", 500),
        }),
        "f5": SPBF(tuple(sorted(RUNNING_CS["f5"])), ExactBitset(f5_subjects), {
            PUB: _bag("u5_", 8000), LANG: _bag("v5_", 9000),
        }),
    }


def exact_running_index() -> SPBFIndex:
    spbfs = exact_running_spbfs()
    return SPBFIndex({fid: SPBFSlice(fid, spbf, RUNNING_ALLOCATION[fid])
                      for fid, spbf in spbfs.items()})


def running_stars(query: Optional[Query] = None) -> dict[str, StarPattern]:
    q = query or parse_query(RUNNING_QUERY)
    return {st.key: st for st in star_decompose(q.bgp)}


# -- concrete data instantiation ------------------------------------------------

RUNNING_DATA = f"""\
<http://ex/a1> <{NAT}> <http://ex/c_no> .
<http://ex/a1> <{AUTH}> <http://ex/b1> .
<http://ex/a1> <{AUTH}> <http://ex/b2> .
<http://ex/a1> <{DEATH}> "1870-01-01" .
<http://ex/a2> <{NAT}> <http://ex/c_no> .
<http://ex/a2> <{AUTH}> <http://ex/b3> .
<http://ex/a2> <{DEATH}> "1900-06-30" .
<http://ex/a3> <{NAT}> <http://ex/c_fi> .
<http://ex/a3> <{AUTH}> <http://ex/b4> .
<http://ex/a3> <{DEATH}> "1955-03-12" .
<http://ex/a4> <{NAT}> <http://ex/c_dk> .
<http://ex/a4> <{AUTH}> <http://ex/b5> .
<http://ex/a5> <{NAT}> <http://ex/c_se> .
<http://ex/a5> <{AUTH}> <http://ex/b1> .
<http://ex/c_dk> <{CAP}> <http://ex/k_dk> .
<http://ex/c_dk> <{CUR}> <http://ex/m_dkk> .
<http://ex/c_dk> <{POP}> "5900000" .
<http://ex/c_se> <{CAP}> <http://ex/k_se> .
<http://ex/c_se> <{CUR}> <http://ex/m_sek> .
<http://ex/c_se> <{POP}> "10400000" .
<http://ex/c_no> <{CAP}> <http://ex/k_no> .
<http://ex/c_no> <{CUR}> <http://ex/m_nok> .
<http://ex/c_fi> <{CAP}> <http://ex/k_fi> .
<http://ex/c_fi> <{CUR}> <http://ex/m_eur> .
<http://ex/b1> <{PUB}> <http://ex/x1> .
<http://ex/b1> <{LANG}> <http://ex/l1> .
<http://ex/b2> <{PUB}> <http://ex/x2> .
<http://ex/b2> <{LANG}> <http://ex/l2> .
<http://ex/b3> <{PUB}> <http://ex/x3> .
<http://ex/b3> <{LANG}> <http://ex/l3> .
<http://ex/b4> <{PUB}> <http://ex/x4> .
<http://ex/b4> <{LANG}> <http://ex/l4> .
<http://ex/b5> <{PUB}> <http://ex/x5> .
<http://ex/b5> <{LANG}> <http://ex/l5> .
"""


def running_fragments():
    """Fragment the concrete dataset; returns (fragments, cs-name -> id map)."""
    graph = parse_ntriples(RUNNING_DATA)
    frags = fragment_by_cs(graph)
    by_cs = {tuple(sorted(cs)): name for name, cs in RUNNING_CS.items()}
    names = {}
    for f in frags:
        names[f.id] = by_cs[f.cs.predicates]
    return frags, names


def build_running_network(m: int = 20000, k: int = 5) -> tuple[Network, dict[str, str]]:
    """The five-node network holding the concrete dataset, allocated so each
    join pair is co-located as in the worked example. Returns (network,
    fragment id -> f1..f5 name map)."""
    config = NetworkConfig(node_count=5, neighbor_count=2, replication_factor=2,
                           horizon=5, rng_seed=7, bloom=BloomParams(m=m, k=k))
    net = network_from_layout(config, {n: list(v) for n, v in RUNNING_TOPOLOGY.items()})
    frags, names = running_fragments()
    allocation = {f.id: RUNNING_ALLOCATION[names[f.id]] for f in frags}
    place_fragments(net, frags, origin="n1", allocation=allocation)
    return net, names


# -- random small instances -------------------------------------------------------


def random_graph(rng: random.Random, n_subjects: int, predicates: list[str],
                 max_triples: int = 300) -> "KnowledgeGraph":
    from starbloom.model import KnowledgeGraph
    subjects = [f"http://ex/s{i}" for i in range(n_subjects)]
    objects = subjects + [f"http://ex/o{i}" for i in range(n_subjects)]
    triples = set()
    for s in subjects:
        for p in rng.sample(predicates, rng.randint(1, min(3, len(predicates)))):
            for _ in range(rng.randint(1, 2)):
                triples.add(Triple(iri(s), iri(p), iri(rng.choice(objects))))
                if len(triples) >= max_triples:
                    return KnowledgeGraph(triples)
    return KnowledgeGraph(triples)


def random_star_query(rng: random.Random, predicates: list[str], max_stars: int = 3) -> Query:
    """1..max_stars chained stars: star i+1's subject is an object variable of
    star i, so the query stays join-connected."""
    n_stars = rng.randint(1, max_stars)
    patterns = []
    subject = Variable("v0")
    counter = 1
    for i in range(n_stars):
        n_tp = rng.randint(1, 2)
        link: Optional[Variable] = None
        for _ in range(n_tp):
            obj = Variable(f"v{counter}")
            counter += 1
            patterns.append((subject, iri(rng.choice(predicates)), obj))
            link = obj
        subject = link
    from starbloom.model import TriplePattern
    return Query(bgp=tuple(TriplePattern(*t) for t in patterns), distinct=rng.random() < 0.3)


def random_network(rng: random.Random, graph, min_subjects: int = 1) -> Network:
    from starbloom.netsim import upload
    node_count = rng.randint(2, 5)
    config = NetworkConfig(
        node_count=node_count,
        neighbor_count=rng.randint(1, max(1, node_count - 1) if node_count > 1 else 0),
        replication_factor=rng.randint(1, min(2, node_count)),
        horizon=5,
        rng_seed=rng.randint(0, 10_000),
        bloom=BloomParams(m=4096, k=3),
    )
    net = create_connected(config)
    upload(net, graph, origin="n1", min_subjects=min_subjects)
    return net


def create_connected(config: NetworkConfig) -> Network:
    """Seeded random network that is always strongly connected: a random ring
    plus extra random neighbors (keeps every node's view complete, so random
    instances stay comparable to the whole-graph oracle)."""
    rng = random.Random(config.rng_seed)
    ids = [f"n{i}" for i in range(1, config.node_count + 1)]
    ring = ids[1:] + ids[:1]
    rng.shuffle(ring)
    successor = {ring[i]: ring[(i + 1) % len(ring)] for i in range(len(ring))}
    topology = {}
    for nid in ids:
        neighbors = {successor[nid]} if config.neighbor_count else set()
        pool = [x for x in ids if x != nid and x not in neighbors]
        while len(neighbors) < config.neighbor_count:
            neighbors.add(pool.pop(rng.randrange(len(pool))))
        topology[nid] = sorted(neighbors)
    if config.node_count == 1:
        topology = {ids[0]: []}
    return network_from_layout(config, topology)
