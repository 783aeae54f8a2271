#!/usr/bin/env python3
"""Independent AC-OPF reference solve for the bundled nine-bus fixture.

Solves the same nonlinear program with scipy's trust-constr (a completely
separate implementation path from the C++ interior-point solver) and prints
the optimal objective. Run once; the value is frozen into test_acopf.cpp.

Usage: python3 reference_opf.py ../fixtures/case9.json
"""
import json
import sys

import numpy as np
from scipy.optimize import NonlinearConstraint, minimize


def build(case_path):
    with open(case_path) as f:
        case = json.load(f)
    base = case["base_mva"]
    buses = case["buses"]
    gens = case["generators"]
    branches = case["branches"]
    n = len(buses)
    idx = {b["id"]: i for i, b in enumerate(buses)}

    ybus = np.zeros((n, n), dtype=complex)
    for br in branches:
        i, j = idx[br["from"]], idx[br["to"]]
        y = 1.0 / complex(br["r"], br["x"])
        half = 1j * br.get("b_sh", 0.0) / 2.0
        t = br.get("tap", 1.0)
        ybus[i, i] += (y + half) / t**2
        ybus[j, j] += y + half
        ybus[i, j] -= y / t
        ybus[j, i] -= y / t
    return case, base, buses, gens, branches, idx, ybus


def main():
    case_path = sys.argv[1]
    loads = {5: (0.9, 0.3), 7: (1.0, 0.35), 9: (1.25, 0.5)}  # nominal, per-unit

    case, base, buses, gens, branches, idx, ybus = build(case_path)
    n, ng = len(buses), len(gens)
    slack = next(i for i, b in enumerate(buses) if b["kind"] == "SLACK")
    nonslack = [i for i in range(n) if i != slack]
    gen_bus = [idx[g["bus"]] for g in gens]

    pd = np.zeros(n)
    qd = np.zeros(n)
    for bus_id, (p, q) in loads.items():
        pd[idx[bus_id]] = p
        qd[idx[bus_id]] = q

    nth = n - 1

    def split(x):
        th = np.zeros(n)
        th[nonslack] = x[:nth]
        vm = x[nth:nth + n]
        pg = x[nth + n:nth + n + ng]
        qg = x[nth + n + ng:]
        return th, vm, pg, qg

    def balance(x):
        th, vm, pg, qg = split(x)
        v = vm * np.exp(1j * th)
        s = v * np.conj(ybus @ v)
        pg_bus = np.zeros(n)
        qg_bus = np.zeros(n)
        for g, b in enumerate(gen_bus):
            pg_bus[b] += pg[g]
            qg_bus[b] += qg[g]
        return np.concatenate([s.real + pd - pg_bus, s.imag + qd - qg_bus])

    def flows(x):
        th, vm, pg, qg = split(x)
        v = vm * np.exp(1j * th)
        out = []
        for br in branches:
            i, j = idx[br["from"]], idx[br["to"]]
            y = 1.0 / complex(br["r"], br["x"])
            half = 1j * br.get("b_sh", 0.0) / 2.0
            t = br.get("tap", 1.0)
            i_f = (y + half) / t**2 * v[i] - y / t * v[j]
            i_t = (y + half) * v[j] - y / t * v[i]
            out.append(abs(v[i] * np.conj(i_f)) ** 2)
            out.append(abs(v[j] * np.conj(i_t)) ** 2)
        return np.array(out)

    def objective(x):
        _, _, pg, _ = split(x)
        total = 0.0
        for g, gen in enumerate(gens):
            c = gen["cost"] + [0.0] * (3 - len(gen["cost"]))
            p_mw = pg[g] * base
            total += c[0] + c[1] * p_mw + c[2] * p_mw**2
        return total

    lb = np.concatenate([
        -np.pi * np.ones(nth),
        [b["v_min"] for b in buses],
        [g["p_min"] / base for g in gens],
        [g["q_min"] / base for g in gens],
    ])
    ub = np.concatenate([
        np.pi * np.ones(nth),
        [b["v_max"] for b in buses],
        [g["p_max"] / base for g in gens],
        [g["q_max"] / base for g in gens],
    ])
    smax2 = np.array([br["s_max"] ** 2 for br in branches for _ in range(2)])

    x0 = np.concatenate([
        np.zeros(nth),
        np.ones(n),
        [(g["p_min"] + g["p_max"]) / 2 / base for g in gens],
        np.zeros(ng),
    ])

    res = minimize(
        objective,
        x0,
        method="trust-constr",
        bounds=list(zip(lb, ub)),
        constraints=[
            NonlinearConstraint(balance, 0.0, 0.0),
            NonlinearConstraint(flows, -np.inf, smax2),
        ],
        options={"maxiter": 3000, "gtol": 1e-10, "xtol": 1e-12},
    )
    print("status:", res.status, res.message)
    print("max |balance|:", np.abs(balance(res.x)).max())
    print("objective: %.6f" % res.fun)


if __name__ == "__main__":
    main()
