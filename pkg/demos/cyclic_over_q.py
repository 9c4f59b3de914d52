"""
The cyclic-6 basis over Q, one prime at a time
==============================================

"""

# build the benchmark system and run the whole multi-modular pipeline
from gbmodular import generate_cyclic, run_session

system = generate_cyclic(6)
result = run_session(system)
print(len(result.basis), "elements,", result.primes_merged, "primes merged")

# the first few elements, in increasing order of leading monomial
for f in result.basis[:4]:
    print("  ", f)

# elements come back in clusters: frontier after each merged prime
for primes, frontier in result.curve:
    print(f"{primes:3d} primes -> {frontier:3d} reconstructed")

# largest coefficient, in bits
bits = max(max(abs(c.numerator).bit_length(), c.denominator.bit_length())
           for f in result.basis for c in f.coeffs)
print("largest numerator or denominator:", bits, "bits")
