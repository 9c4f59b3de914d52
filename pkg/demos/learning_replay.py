"""
Learning at one prime, replaying at the next
============================================

"""

import time

from gbmodular import PrimeField, PrimeStream, gbasis_mod_p, generate_cyclic

system = generate_cyclic(7)
p1, p2 = PrimeStream.prime_at(0), PrimeStream.prime_at(1)

# warm up the compiled kernels so the timings compare like with like
gbasis_mod_p(generate_cyclic(4), PrimeField(p1))

# record: a full F4 run that keeps track of rows reducing to zero
t = time.perf_counter()
basis1, record = gbasis_mod_p(system, PrimeField(p1), "record")
print(f"record at {p1}: {len(basis1)} elements, {record.zero_rows} zero rows, "
      f"{time.perf_counter() - t:.2f}s")

# replay at a second prime: no pair selection, zero rows skipped
t = time.perf_counter()
basis2, _ = gbasis_mod_p(system, PrimeField(p2), "replay", record)
print(f"replay at {p2}: {basis2.stats['zero_rows_skipped']} rows skipped, "
      f"{time.perf_counter() - t:.2f}s")

# same shape at both primes
print("same leading monomials:", basis1.leads == basis2.leads)

# the record is a compact binary blob
blob = record.to_bytes(system[0].ring.layout)
print(len(blob), "bytes of learning data")
