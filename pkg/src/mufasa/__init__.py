"""Multi-facet contextual bandits with assembled neural networks."""

from .agents import MufasaPolicy as MufasaPolicy
from .cli.main import main as main
from .config import Config as Config
from .envs import Environment as Environment
from .envs import EnvSpec as EnvSpec
from .runner import compare as compare
from .runner import run as run
