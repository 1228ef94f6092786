"""Physical constants and unit multipliers.

All values come from ``scipy.constants`` (CODATA 2018). Every other module
imports from here so that no constant is written out twice.
"""
from scipy import constants as _c

h = _c.h
hbar = _c.hbar
e = _c.e
m_e = _c.m_e
m_p = _c.m_p
u = _c.atomic_mass
epsilon_0 = _c.epsilon_0

# Coulomb constant times e^2, J*m
e2_4pi_eps0 = e**2 / (4 * _c.pi * epsilon_0)

# unit multipliers: value_in_SI = value * unit
m = 1.0
mm = 1e-3
um = 1e-6
nm = 1e-9
pm = 1e-12
angstrom = 1e-10

s = 1.0
ms = 1e-3
us = 1e-6
ns = 1e-9

J = 1.0
eV = e
meV = 1e-3 * e
keV = 1e3 * e

V_per_m = 1.0
tesla = 1.0
gauss = 1e-4
mG = 1e-7

rad = 1.0
deg = _c.pi / 180

# van der Waals coefficient, J*m^3
meV_nm3 = meV * nm**3
# polarizability volume, m^3
angstrom3 = angstrom**3
