"""Comparison checks over sweep results and a markdown report."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from egodqn.agent import Variant
from egodqn.harness.runner import SweepReport

V = Variant
MULTI_ARCHITECTURES = {
    "global": (V.GLOBAL_NOCENTER, V.GLOBAL_PAD, V.GLOBAL_ROLL),
    "globallocal": (V.GLOBALLOCAL_NOCENTER, V.GLOBALLOCAL_PAD, V.GLOBALLOCAL_ROLL),
    "integrated": (V.INTEGRATED_NOCENTER, V.INTEGRATED_PAD, V.INTEGRATED_ROLL),
}

LEARNING_THRESHOLD = 4.0
CENTERING_MARGIN = 0.5
CENTERING_EPISODE = 300
REACTIVITY_MARGIN = 0.5
REACTIVITY_EPISODE = 100


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _need(report: SweepReport, variants):
    missing = [v.value for v in variants if v not in report.results]
    if missing:
        raise KeyError(f"sweep results missing for {', '.join(missing)}")
    return [report.results[v] for v in variants]


def check_learning(report: SweepReport) -> Check:
    results = _need(report, list(Variant))
    finals = {r.variant.value: r.final_running_mean() for r in results}
    worst = min(finals, key=finals.get)
    ok = all(v >= LEARNING_THRESHOLD for v in finals.values())
    body = ", ".join(f"{k}={v:.3f}" for k, v in finals.items())
    return Check("learning", ok, f"final running means (need >= {LEARNING_THRESHOLD}; worst {worst}): {body}")


def check_centering(report: SweepReport) -> Check:
    base, pad, roll = _need(report, MULTI_ARCHITECTURES["global"])
    ep = CENTERING_EPISODE
    b = base.running_mean_at(ep)
    gaps = {r.variant.value: r.running_mean_at(ep) - b for r in (pad, roll)}
    ok = all(g >= CENTERING_MARGIN for g in gaps.values())
    body = ", ".join(f"{k} - {base.variant.value} = {g:+.3f}" for k, g in gaps.items())
    return Check("centering advantage", ok, f"running mean at episode {ep} (need >= +{CENTERING_MARGIN}): {body}")


def stability_gap(report: SweepReport, arch: str) -> float:
    """No-centering stability minus the mean of the two centered variants'."""
    base, pad, roll = _need(report, MULTI_ARCHITECTURES[arch])
    return base.stability() - (pad.stability() + roll.stability()) / 2


def check_stability(report: SweepReport) -> Check:
    lines, ok = [], True
    gaps = {}
    for arch, variants in MULTI_ARCHITECTURES.items():
        base, pad, roll = _need(report, variants)
        sb, sp, sr = base.stability(), pad.stability(), roll.stability()
        arch_ok = sp < sb and sr < sb
        ok &= arch_ok
        gaps[arch] = stability_gap(report, arch)
        lines.append(f"{arch}: nocenter={sb:.3f} pad={sp:.3f} roll={sr:.3f} gap={gaps[arch]:+.3f}"
                     f"{'' if arch_ok else ' (centered not lower)'}")
    widest = all(gaps["global"] >= g for g in gaps.values())
    ok &= widest
    lines.append(f"global gap widest: {widest}")
    return Check("stability ordering", ok, "; ".join(lines))


def check_summary(report: SweepReport) -> Check:
    s3, s5 = _need(report, (V.SUMMARY_3X3, V.SUMMARY_5X5))
    a3, a5 = s3.auc(), s5.auc()
    return Check("summary ordering", a5 >= a3, f"AUC summary-5x5={a5:.1f} vs summary-3x3={a3:.1f}")


def check_reactivity(report: SweepReport) -> Check:
    base, gl = _need(report, (V.GLOBAL_NOCENTER, V.GLOBALLOCAL_PAD))
    ep = REACTIVITY_EPISODE
    gap = gl.running_mean_at(ep) - base.running_mean_at(ep)
    return Check("early reactivity", gap >= REACTIVITY_MARGIN,
                 f"running mean at episode {ep}: globallocal-pad - global-nocenter = {gap:+.3f} "
                 f"(need >= +{REACTIVITY_MARGIN})")


BEHAVIOUR_CHECKS = (check_learning, check_centering, check_stability, check_summary, check_reactivity)


def run_checks(report: SweepReport) -> list[Check]:
    out = []
    for fn in BEHAVIOUR_CHECKS:
        try:
            out.append(fn(report))
        except (KeyError, ValueError) as exc:
            out.append(Check(fn.__name__.removeprefix("check_"), False, f"not evaluable: {exc}"))
    return out


def markdown(report: SweepReport, checks=None) -> str:
    checks = run_checks(report) if checks is None else checks
    lines = ["# Sweep report", "", "| variant | seeds | final running mean | RM@100 | RM@300 | AUC | stability |",
             "|---|---|---|---|---|---|---|"]
    for v, res in report.results.items():
        n = len(res.mean_curve())
        rm100 = f"{res.running_mean_at(100):.3f}" if n >= 100 else "-"
        rm300 = f"{res.running_mean_at(300):.3f}" if n >= 300 else "-"
        try:
            stab = f"{res.stability():.3f}"
        except ValueError:
            stab = "-"
        lines.append(f"| {v.value} | {len(res.seeds)} | {res.final_running_mean():.3f} | {rm100} | {rm300} "
                     f"| {res.auc():.1f} | {stab} |")
    lines += ["", "## Checks", ""] + [f"- {c.line()}" for c in checks]
    if report.failures:
        lines += ["", "## Failed or missing runs", ""]
        lines += [f"- {v.value} seed {s}: {str(err).strip().splitlines()[-1]}" for v, s, err in report.failures]
    return "\n".join(lines) + "\n"


def write_report(out, report: SweepReport) -> Path:
    path = Path(out) / "report.md"
    path.write_text(markdown(report), encoding="utf-8")
    return path
