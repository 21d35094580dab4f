"""Whole-program driver: unroll, analyse bottom-up, merge the graph."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List

from . import guard as G
from .cfg import DominanceInfo, analyze_cfg, gate_phis
from .config import AnalysisConfig
from .guard import Guard
from .inter import CallGraph, FunctionSummary, build_call_graph, connect_formal_summary_edges, reach_conditions, summarize
from .intra import FunctionAnalysis
from .ir import Program, parse
from .unroll import unroll
from .vfg import ValueFlowGraph


@dataclass
class Analysis:
    program: Program  # unrolled, with gated phis
    config: AnalysisConfig
    callgraph: CallGraph
    doms: Dict[str, DominanceInfo]
    functions: Dict[str, FunctionAnalysis]
    summaries: Dict[str, FunctionSummary]
    graph: ValueFlowGraph
    reach: Dict[str, Guard]
    warnings: List[str] = field(default_factory=list)

    # label bookkeeping -------------------------------------------------
    def site_of(self, label: int) -> int:
        return self._sites.get(label, label)

    def __post_init__(self):
        self._sites = {}
        for f in self.program.functions.values():
            for _, s in f.statements():
                self._sites[s.label] = s.site
            self._sites[f.ret.label] = f.ret.site

    def stats(self) -> Dict[str, int]:
        return {
            "functions": len(self.functions),
            "nodes": len(self.graph.nodes),
            "edges": self.graph.count(),
            "pruned_unsat": self.graph.pruned,
            "constraints": sum(a.constraints for a in self.functions.values()),
            "load_edges_merged": sum(a.merged_load_edges for a in self.functions.values()),
            "load_edges_per_object": sum(a.unmerged_load_edges for a in self.functions.values()),
            "aux_vars": sum(len(s.aux) for s in self.summaries.values()),
        }

    def has_havoc(self) -> bool:
        return self.program.has_havoc()


def prepare(prog: Program, config: AnalysisConfig) -> Program:
    u = unroll(prog, config.unroll, config.recursion_depth)
    return u


def _analyze_one(f, dom, config, summaries):
    an = FunctionAnalysis(f, dom, config, summaries).run()
    summ = summarize(an)
    summ.summary_edges = connect_formal_summary_edges(an, summaries)
    return an, summ


def analyze_program(prog: Program, config: AnalysisConfig = AnalysisConfig(), unrolled: bool = False) -> Analysis:
    p = prog if unrolled else prepare(prog, config)
    cg = build_call_graph(p)
    doms: Dict[str, DominanceInfo] = {}
    funcs = {}
    for name, f in p.functions.items():
        dom = analyze_cfg(f)
        doms[name] = dom
        funcs[name] = gate_phis(f, dom)
    p = Program(funcs, p.atoms, list(p.warnings), p.max_label)

    summaries: Dict[str, FunctionSummary] = {}
    analyses: Dict[str, FunctionAnalysis] = {}
    levels: Dict[int, List[str]] = {}
    for name in p.functions:
        levels.setdefault(cg.level[name], []).append(name)
    pool = ThreadPoolExecutor(config.jobs) if config.jobs > 1 else None
    try:
        for lvl in sorted(levels):
            names = levels[lvl]
            published = dict(summaries)  # read-only snapshot for this level
            if pool is not None and len(names) > 1:
                futs = {n: pool.submit(_analyze_one, funcs[n], doms[n], config, published) for n in names}
                results = {n: fut.result() for n, fut in futs.items()}
            else:
                results = {n: _analyze_one(funcs[n], doms[n], config, published) for n in names}
            for n in names:
                analyses[n], summaries[n] = results[n]
    finally:
        if pool is not None:
            pool.shutdown()

    graph = ValueFlowGraph()
    for name in p.functions:
        graph.merge(analyses[name].graph)
    graph.freeze()
    call_pc = {c.label: c.pc for a in analyses.values() for c in a.call_sites}
    reach = reach_conditions(cg, call_pc)
    warnings = list(p.warnings)
    for name in p.functions:
        warnings.extend(summaries[name].warnings)
    return Analysis(p, config, cg, doms, analyses, summaries, graph, reach, warnings)


def analyze_text(text: str, config: AnalysisConfig = AnalysisConfig()) -> Analysis:
    return analyze_program(parse(text), config)
