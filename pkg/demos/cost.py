"""Multiplication counts per AP and at the CPU for a few system sizes."""

from simcellfree import ap_cost, cpu_cost

for N, M, K, L, T in ((64, 4, 3, 4, 2), (256, 16, 8, 16, 4), (1024, 16, 8, 64, 8)):
    ap, cpu = ap_cost(N, M, K, T), cpu_cost(L, K, M)
    print(f"N={N:5d} M={M:3d} K={K} L={L:3d} T={T}: per AP {ap.total:>12,d}  CPU {cpu.total:>10,d}")
