from .base import ArmSetRound as ArmSetRound
from .base import Decision as Decision
from .base import Policy as Policy
from .base import RoundOutcome as RoundOutcome
from .base import enumerate_combinations as enumerate_combinations
from .kerucb import KerUcbPolicy
from .linucb import LinUcbPolicy
from .mufasa import MufasaPolicy as MufasaPolicy
from .neuucb import NeuUcbPolicy
from .uniform import RandomPolicy

POLICIES: dict[str, type[Policy]] = {
    policy.name: policy for policy in (MufasaPolicy, LinUcbPolicy, KerUcbPolicy, NeuUcbPolicy, RandomPolicy)
}
