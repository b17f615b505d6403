"""Regenerate the H2 STO-3G qubit Hamiltonian fixture.

Runs restricted Hartree-Fock with PySCF at each bond length, builds the
second-quantized Hamiltonian over 4 interleaved spin orbitals
(0a, 0b, 1a, 1b), maps it to qubits with Jordan-Wigner numerically and
decomposes the 16x16 matrix into Pauli strings via Tr(P H) / 16.

Usage: python3 scripts/gen_h2_fixture.py > crates/core/data/h2_sto3g.txt
"""
import itertools

import numpy as np
from pyscf import ao2mo, gto, scf

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}
N = 4


def kron_all(ms):
    out = np.array([[1.0 + 0j]])
    for m in ms:
        out = np.kron(out, m)
    return out


def annihilation(j):
    lower = (X + 1j * Y) / 2
    return kron_all([I2] * j + [lower] + [Z] * (N - j - 1))


def hamiltonian(bond):
    mol = gto.M(atom=f"H 0 0 0; H 0 0 {bond}", basis="sto-3g", unit="Angstrom", verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), c.shape[1])  # (pq|rs)
    a = [annihilation(j) for j in range(N)]
    ad = [m.conj().T for m in a]
    h = mol.energy_nuc() * np.eye(2**N, dtype=complex)
    for p, q in itertools.product(range(N), repeat=2):
        if p % 2 == q % 2:
            h += h1[p // 2, q // 2] * ad[p] @ a[q]
    for p, q, r, s in itertools.product(range(N), repeat=4):
        # <pq|rs> = (pr|qs), spin must match pairwise
        if p % 2 == r % 2 and q % 2 == s % 2:
            v = eri[p // 2, r // 2, q // 2, s // 2]
            if abs(v) > 0:
                h += 0.5 * v * ad[p] @ ad[q] @ a[s] @ a[r]
    return h


def decompose(h):
    terms = []
    for letters in itertools.product("IXYZ", repeat=N):
        p = kron_all([PAULI[l] for l in letters])
        coeff = np.trace(p @ h) / 2**N
        if abs(coeff) > 1e-12:
            terms.append(("".join(letters), coeff.real))
    return terms


def main():
    print("# H2 / STO-3G, Jordan-Wigner, 4 qubits, energies in Hartree")
    for k in range(150):
        bond = round(0.5 + 0.03 * k, 2)
        h = hamiltonian(bond)
        print(f"# bond_length={bond:.2f}")
        for letters, coeff in decompose(h):
            print(f"{coeff:+.17e}+0.0i {letters}")
        print()


if __name__ == "__main__":
    main()
