import random

import pytest

from bddseq.blif import parse_blif

PAIRS6_SRC = """\
.model pairs6
.inputs x0 x1 x2 x3 x4 x5
.outputs f
.names x0 x1 p0
11 1
.names x2 x3 p1
11 1
.names x4 x5 p2
11 1
.names p0 p1 p2 f
1-- 1
-1- 1
--1 1
.end
"""

AND2_SRC = """\
.model and2
.inputs a b
.outputs o
.names a b o
11 1
.end
"""

C17_SRC = """\
.model c17
.inputs G1 G2 G3 G6 G7
.outputs G22 G23
.names G1 G3 G10
11 0
.names G3 G6 G11
11 0
.names G2 G11 G16
11 0
.names G11 G7 G19
11 0
.names G10 G16 G22
11 0
.names G16 G19 G23
11 0
.end
"""

T5_SRC = """\
.model t5
.inputs a b c d e
.outputs f
.names a b p
11 1
.names c d q
11 1
.names p q r
1- 1
-1 1
.names r e f
10 1
.end
"""


@pytest.fixture
def pairs6():
    """f = x0*x1 + x2*x3 + x4*x5: three disjoint two-input products."""
    return parse_blif(PAIRS6_SRC)


@pytest.fixture
def and2():
    return parse_blif(AND2_SRC)


@pytest.fixture
def c17():
    """The five-input ISCAS85 benchmark, six NAND gates."""
    return parse_blif(C17_SRC)


@pytest.fixture
def t5():
    """Five-input tree used for decoder and training tests."""
    return parse_blif(T5_SRC)


@pytest.fixture
def rng():
    return random.Random(1234)
