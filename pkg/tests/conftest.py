import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from streammon import check_types, parse

# -- specification corpus ----------------------------------------------------

INTRO_SPEC = """
  input  double sensor
  input  double reference
  input  double timestamp
  output double error := sensor[2sec, 0, avg]
                    - reference[2sec, 0, avg]
  output double acc_error := error[10sec, 0, integral]
  trigger acc_error > 5
"""

PID_SPEC = """
input double temperature
input double reference
time input double timestamp

output double smooth_temp := temperature[10s,avg,0.0]
output double smooth_ref := reference[10s,avg,0.0]

output double error := smooth_temp - smooth_ref
output double acc_error := error[50s, avg, 0.0]

trigger any(acc_error > 0.016)
"""

PHI_SPEC = """
\tinput  double a
\tinput  double b
\toutput double diff = abs(a - b[-1,0])
\toutput double acc = diff[10sec,avg,0]
"""

# diff supplied with a stream clock: its rate becomes fixed
PHI_PRIME_SPEC = PHI_SPEC.replace(
    "output double diff =", "output double diff: 1Hz ="
)

# real-time offset into a variable-rate input
PHI_PPRIME_SPEC = PHI_SPEC.replace("b[-1,0]", "b[-1sec,0]")

CARS_SPEC = """
input bool offRoad
input int CID
input bool pickUp

output bool offRoadPickUp<int cid>: 0.1Hz
  invoke: CID
  extend: cid = CID
  := offRoad & pickUp

output bool suspicious<int cid>
  invoke: CID
  extend: cid = CID
  := offRoadPickUp(cid)[8h, count]?0 > 5
"""

# fleet scenario with true off-road pick-up counting, termination, and triggers
FLEET_SPEC = """
input int CID
input bool offRoad
input bool pickUp
input bool retire

output int orp<int cid>
  invoke: CID
  extend: cid = CID
  terminate: retire & (cid = CID)
  := if offRoad & pickUp then 1 else 0

output bool suspicious<int cid>
  invoke: CID
  extend: cid = CID
  terminate: retire & (cid = CID)
  := orp(cid)[8h, sum]?0 > 5

trigger any(suspicious) "suspicious vehicle"
"""


def typed(src: str):
    return check_types(parse(src))


@pytest.fixture
def pid_tspec():
    return typed(PID_SPEC)


@pytest.fixture
def fleet_tspec():
    return typed(FLEET_SPEC)
