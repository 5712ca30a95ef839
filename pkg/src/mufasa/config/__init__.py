from dataclasses import dataclass
from dataclasses import field as dataclass_field
from pathlib import Path
from textwrap import dedent
from types import NoneType, UnionType
from typing import Annotated, Any, ClassVar, TypeAlias, get_args, get_origin, get_type_hints

from .. import toml
from ..errors import ConfigError

RawConfigType: TypeAlias = str | bool | int | float | list[Any]


@dataclass
class TypeModel:
    ty: type
    args: list["TypeModel"]

    @staticmethod
    def parse_annotation(annotation: Any) -> "TypeModel":
        origin = get_origin(annotation)
        if origin is None:
            return TypeModel(annotation, [])

        args = get_args(annotation)
        return TypeModel(origin, [TypeModel.parse_annotation(arg) for arg in args])

    def generic_string(self) -> str:
        ret = self.ty.__name__
        if self.args:
            ret += f"[{', '.join(arg.generic_string() for arg in self.args)}]"
        return ret

    def args_of(self, ty: Any) -> list["TypeModel"]:
        assert self.ty is ty
        return self.args

    def accepts(self, value: Any) -> bool:
        # bool is an int subclass, but `true` is never a valid count
        if isinstance(value, bool) and self.ty is not bool:
            return False
        if not isinstance(value, self.ty):
            return False
        if self.ty is list and self.args:
            return all(any(arg.accepts(item) for arg in self.item_types()) for item in value)
        return True

    def item_types(self) -> list["TypeModel"]:
        if self.args and self.args[0].ty is UnionType:
            return self.args[0].args
        return self.args


@dataclass
class Field:
    raw_tys: list[TypeModel]
    validated_ty: TypeModel
    description: str

    @staticmethod
    def parse_annotation(annotation: Any) -> "Field":
        model = TypeModel.parse_annotation(annotation)

        # assert that we got an Annotation and get their args
        raw_union_ty, validated_ty, description_ = model.args_of(Annotated)

        description = description_.ty
        assert isinstance(description, str)
        description = dedent(description).strip()

        raw_tys = [raw_ty for raw_ty in raw_union_ty.args_of(UnionType) if raw_ty.ty is not NoneType]
        return Field(raw_tys, validated_ty, description)


class Section:
    """Common accessors of the config sections."""

    name: ClassVar[str]

    @classmethod
    def get_fields(cls) -> dict[str, Field]:
        """
        Returns a mapping of field name to field type and description text.
        """

        ret: dict[str, Field] = {}
        for field_name, annotation in get_type_hints(cls, include_extras=True).items():
            if get_origin(annotation) is Annotated:
                ret[field_name] = Field.parse_annotation(annotation)
        return ret

    def _check_name(self, name: str):
        if name not in self.get_fields():
            raise ConfigError(f"unknown config setting {self.name}.{name}")

    def get(self, name: str) -> RawConfigType | None:
        self._check_name(name)
        return getattr(self, name)

    def set(self, name: str, value: RawConfigType | None):
        self._check_name(name)
        field = self.get_fields()[name]

        is_raw_ty = any(raw_ty.accepts(value) for raw_ty in field.raw_tys)
        if not (value is None or is_raw_ty):
            raise ConfigError(f"{self.name}.{name}: wrong type (got {type(value).__name__})")

        setattr(self, name, value)


@dataclass
class EnvSection(Section):
    # pylint: disable=too-many-instance-attributes

    name: ClassVar[str] = "env"

    bandits: Annotated[
        int | None,
        int,
        """
        Number of bandits K. One arm is played in every bandit each round.
        """,
    ] = None

    dim: Annotated[
        int | list[int] | None,
        list[int],
        """
        Context dimension of every bandit, or one value per bandit.

        Ignored for `dataset` arms, where the dimension is classes x features.
        """,
    ] = None

    arms: Annotated[
        int | list[int] | None,
        list[int],
        """
        Number of candidate arms offered per round, for every bandit or per bandit.

        For `dataset` arms this is the size of the arm pool, which always contains
        the arm of the true class.
        """,
    ] = None

    sub_reward: Annotated[
        str | list[str] | None,
        list[str],
        """
        Ground-truth sub-reward h_k, for every bandit or per bandit.

        One of `linear` (⟨a,x⟩), `square` (⟨a,x⟩²), `cosine` (cos(3⟨a,x⟩) rescaled to [0, 1]),
        `indicator` (1 if ⟨a,x⟩ > 0) and `dataset` (1 if the arm matches the true class).
        The hidden unit vector a is drawn from the seed.
        """,
    ] = None

    final_reward: Annotated[
        str | None,
        str,
        """
        Final reward H applied to the vector of sub-rewards.

        One of `h1_sum` (r¹ + … + rᴷ), `h2_weighted` (2r¹ + r² + … + rᴷ),
        `weighted` (Σ wₖrᵏ with `weights`) and `nonlinear_sqrt` (√Σ max(rᵏ, 0)).
        """,
    ] = None

    weights: Annotated[
        list[float | int] | None,
        list[float],
        """
        Weights of the `weighted` final reward, one per bandit.
        """,
    ] = None

    c_bar: Annotated[
        str | float | int | None,
        float,
        """
        Lipschitz constant C̄ of the final reward.

        `"auto"` uses 1 for `h1_sum` and the largest absolute weight for weighted
        final rewards. `nonlinear_sqrt` needs an explicit value.
        """,
    ] = None

    noise_sigma: Annotated[
        float | int | None,
        float,
        """
        Standard deviation of the Gaussian noise added to the final reward.
        """,
    ] = None

    sub_noise_sigma: Annotated[
        float | int | None,
        float,
        """
        Standard deviation of Gaussian noise added to the reported sub-rewards.
        """,
    ] = None

    mask: Annotated[
        str | list[int] | None,
        str,
        """
        Which sub-rewards are reported to the agent: `"all"`, `"none"`, or a list of
        bandit indices (counted from 0). The final reward is always reported.
        """,
    ] = None

    arm_generation: Annotated[
        str | None,
        str,
        """
        How arms are generated each round.

        - `unit_ball`: uniform draws from the unit ball.
        - `dataset`: one sample of a classification CSV per round, encoded as one
          arm per class (the features placed in the class's block).
        - `tradeoff`: two bandits with two arms each, one arm with sub-reward 1 and one
          with sub-reward 0 (needs the `indicator` sub-reward). Only the two combinations
          with sub-rewards (1, 0) and (0, 1) are offered.
        """,
    ] = None

    dataset: Annotated[
        str | list[str] | None,
        list[str],
        """
        Classification CSV (`label,f0,f1,…`) for `dataset` arms, for every bandit or per bandit.

        Relative paths are resolved against the directory of the config file.
        """,
    ] = None

    dataset_classes: Annotated[
        int | None,
        int,
        """
        Number of classes of the dataset. `0` infers it from the largest label.
        """,
    ] = None


@dataclass
class AgentSection(Section):
    # pylint: disable=too-many-instance-attributes

    name: ClassVar[str] = "agent"

    kind: Annotated[
        str | None,
        str,
        """
        The policy to run: `mufasa`, `neuucb`, `linucb`, `kerucb` or `random`.
        """,
    ] = None

    sub_depth: Annotated[int | None, int, "Number of layers of every per-bandit network."] = None
    sub_width: Annotated[int | None, int, "Hidden width of every per-bandit network."] = None
    shared_depth: Annotated[int | None, int, "Number of layers of the shared network."] = None
    shared_width: Annotated[int | None, int, "Hidden width of the shared network."] = None

    shared_net: Annotated[
        bool | None,
        bool,
        """
        Whether MuFasa combines the per-bandit outputs with a learned shared network.
        Without it the prediction is the plain sum of the per-bandit outputs.
        """,
    ] = None

    zero_init_mode: Annotated[
        bool | None,
        bool,
        """
        Feed the shared network the per-bandit outputs twice, so that the mirrored
        initialization makes the whole model output exactly 0 at initialization.
        """,
    ] = None

    neuucb_depth: Annotated[int | None, int, "Number of layers of every K-NeuUCB network."] = None
    neuucb_width: Annotated[int | None, int, "Hidden width of every K-NeuUCB network."] = None

    eta: Annotated[float | int | None, float, "Gradient descent learning rate η."] = None
    steps: Annotated[int | None, int, "Gradient descent steps J per training call."] = None
    lambda_reg: Annotated[
        float | int | None,
        float,
        """
        Regularization λ: the ridge term of the training loss and the initial
        diagonal of every design matrix (also used by the linear and kernel baselines).
        """,
    ] = None

    normalize_step: Annotated[
        bool | None,
        bool,
        """
        Divide the learning rate by the number of training samples, so every step moves
        by η times the mean gradient. The loss stays the summed loss, but the effective
        learning rate on it is η/n instead of η; turn this off for the literal η step.
        """,
    ] = None

    warm_start: Annotated[
        bool | None,
        bool,
        """
        Continue training from the current parameters instead of restarting from θ₀.
        """,
    ] = None

    step_backoffs: Annotated[
        int | None,
        int,
        """
        Halve the step size, at most this many times per training call, whenever a
        gradient step would increase the loss. `0` runs plain gradient descent, which
        can diverge on the end-to-end loss of the assembled model.
        """,
    ] = None

    train_every: Annotated[int | None, int, "Retrain the networks every this many rounds."] = None

    max_history: Annotated[
        int | None,
        int,
        """
        Only train on the latest this many rounds. `0` keeps the full history.
        """,
    ] = None

    recompute_design: Annotated[
        bool | None,
        bool,
        """
        After each training call, rebuild the design matrices from the gradients of the
        new parameters instead of keeping the streaming updates.
        """,
    ] = None

    ucb_mode: Annotated[
        str | None,
        str,
        """
        Confidence bound: `empirical` (λ-scheduled two-term gradient norm) or
        `theoretical` (the γ₁…γ₄ bound).
        """,
    ] = None

    schedule: Annotated[
        str | None,
        str,
        """
        Weight schedule of the empirical bound: `inv_sqrt` (1/√(t+1)), `inv_log`
        (min(1, 1/log(t+2))), `constant`, or `inv_sqrt_pulls` / `inv_log_pulls` which count pulls of the arm
        instead of rounds.
        """,
    ] = None

    exploration: Annotated[
        float | int | None,
        float,
        """
        Exploration weight ν multiplying every confidence term B^k and B^F of the
        neural policies. `1` is the unscaled bound.
        """,
    ] = None

    schedule_constant: Annotated[float | int | None, float, "Weight of the `constant` schedule."] = None
    delta: Annotated[float | int | None, float, "Confidence level δ."] = None
    norm_bound: Annotated[float | int | None, float, "Norm bound S of the ground-truth parameters."] = None
    c_l: Annotated[float | int | None, float, "Constant of γ₁ in the theoretical bound."] = None
    c_1: Annotated[float | int | None, float, "Constant of γ₄ in the theoretical bound."] = None
    c_2: Annotated[float | int | None, float, "Constant of γ₃ in the theoretical bound."] = None

    alpha: Annotated[float | int | None, float, "Exploration weight α of K-LinUCB."] = None
    kernel_bandwidth: Annotated[float | int | None, float, "RBF bandwidth of K-KerUCB."] = None
    kernel_beta: Annotated[float | int | None, float, "Exploration weight β of K-KerUCB."] = None
    kernel_budget: Annotated[int | None, int, "K-KerUCB stops storing contexts after this many rounds."] = None

    combination_cap: Annotated[
        int | None,
        int,
        """
        Largest number of arm combinations that may be scored in one round.
        """,
    ] = None


@dataclass
class RunSection(Section):
    name: ClassVar[str] = "run"

    rounds: Annotated[int | None, int, "Number of rounds T of every run."] = None

    seeds: Annotated[
        list[int] | None,
        list[int],
        """
        Seeds to run. Every seed gets a fresh environment and a fresh agent.
        """,
    ] = None

    outdir: Annotated[
        str | None,
        str,
        """
        Output directory for run logs and summaries, relative to the working directory.
        """,
    ] = None

    agents: Annotated[
        list[str] | None,
        list[str],
        """
        Agents compared by `mufasa compare`, in output order. Empty means only `agent.kind`.
        """,
    ] = None

    threads: Annotated[
        int | None,
        int,
        """
        Maximum number of seeds run in parallel. `0` uses `MUFASA_THREADS`, else 1.
        """,
    ] = None

    save_model: Annotated[
        bool | None,
        bool,
        """
        Save the final MuFasa model next to each run log.
        """,
    ] = None


SECTIONS: tuple[type[Section], ...] = (EnvSection, AgentSection, RunSection)


@dataclass
class Config:
    profile: str | None = None
    env: EnvSection = dataclass_field(default_factory=EnvSection)
    agent: AgentSection = dataclass_field(default_factory=AgentSection)
    run: RunSection = dataclass_field(default_factory=RunSection)
    base_dir: Path = dataclass_field(default_factory=Path)
    """directory that relative dataset paths are resolved against"""

    def sections(self) -> dict[str, Section]:
        return {"env": self.env, "agent": self.agent, "run": self.run}

    @staticmethod
    def get_fields() -> dict[str, Field]:
        """
        Returns a mapping of dotted field name (`env.bandits`) to field type and description.
        """

        return {
            f"{section.name}.{field_name}": field
            for section in SECTIONS
            for field_name, field in section.get_fields().items()
        }

    def _split(self, dotted: str) -> tuple[Section, str]:
        section, _, name = dotted.partition(".")
        sections = self.sections()
        if section not in sections or not name:
            raise ConfigError(f"unknown config setting {dotted}")
        return sections[section], name

    def get(self, dotted: str) -> RawConfigType | None:
        section, name = self._split(dotted)
        return section.get(name)

    def set(self, dotted: str, value: RawConfigType | None):
        section, name = self._split(dotted)
        section.set(name, value)

    @staticmethod
    def parse_config(
        path: Path | None = None,
        raw: str | None = None,
        obj: dict[str, Any] | None = None,
    ) -> "Config":
        """
        Parse a config from one of these sources:
        - a path to a `.toml` file,
        - a raw toml string,
        - a dictionary as produced by parsing toml.

        The toml has an optional top level `profile` key and the tables `env`,
        `agent` and `run` (dotted keys like `env.bandits = 2` are the same thing).
        """

        config = Config()

        if obj is None:
            if raw is None:
                if path is None:
                    raise ValueError("one of the function arguments needs to be set")
                config.base_dir = path.parent
                raw = path.read_text(encoding="utf-8")
            try:
                obj = toml.loads(raw)
            except ValueError as exc:
                raise ConfigError(f"{path or '<config>'}: {exc}") from exc

        for key, val in obj.items():
            if key == "profile":
                if not isinstance(val, str):
                    raise ConfigError("profile: must be a string")
                config.profile = val
            elif key in config.sections() and isinstance(val, dict):
                for field_name, field_val in val.items():
                    config.set(f"{key}.{field_name}", field_val)
            else:
                raise ConfigError(f"unknown config key {key}")

        return config

    def validate(self) -> "ValidatedConfig":
        """
        Validate the Config, filling in all missing data from the selected
        profile and then from the `default` profile.
        """

        validated = ValidatedConfig()
        validated.profile = self.profile or "default"
        validated.base_dir = self.base_dir
        if validated.profile not in PROFILES:
            raise ConfigError(f"profile: unknown profile {validated.profile!r} (known: {', '.join(PROFILES)})")

        for dotted in self.get_fields():
            value = self.get(dotted)
            if value is None:
                value = PROFILES[validated.profile].fields.get(dotted)
            if value is None:
                value = PROFILES["default"].fields.get(dotted)
            assert value is not None, f"{dotted} not found in default profile"
            validated.set(dotted, value)

        # check that we did not forget about any field
        for dotted in validated.get_fields():
            assert validated.get(dotted) is not None

        validated.check()
        return validated


def _require(ok: bool, dotted: str, message: str):
    if not ok:
        raise ConfigError(f"{dotted}: {message}")


class ValidatedConfig(Config):
    """A config with every field set and all values checked."""

    # pylint: disable=too-many-public-methods

    @property
    def n_bandits(self) -> int:
        assert self.env.bandits is not None
        return self.env.bandits

    def per_bandit(self, dotted: str) -> list[Any]:
        """A per-bandit setting, broadcasting a single value to all bandits."""

        value = self.get(dotted)
        if isinstance(value, list):
            return list(value)
        return [value] * self.n_bandits

    def c_bar(self) -> float | None:
        if self.env.c_bar == "auto":
            return None
        assert isinstance(self.env.c_bar, (int, float))
        return float(self.env.c_bar)

    def mask(self) -> str | tuple[int, ...]:
        mask = self.env.mask
        if isinstance(mask, list):
            return tuple(mask)
        assert isinstance(mask, str)
        return mask

    def dataset_paths(self) -> list[Path]:
        return [self.base_dir / raw for raw in self.per_bandit("env.dataset")]

    def agent_kinds(self) -> list[str]:
        assert self.run.agents is not None and self.agent.kind is not None
        return list(self.run.agents) or [self.agent.kind]

    def max_history(self) -> int | None:
        return self.agent.max_history or None

    def check(self):
        # pylint: disable=too-many-branches,import-outside-toplevel
        from ..agents import POLICIES
        from ..confidence import SCHEDULES, UCB_MODES
        from ..envs import ARM_GENERATIONS, FINAL_REWARD_KINDS, SUB_REWARD_KINDS

        k = self.n_bandits
        _require(k >= 1, "env.bandits", "must be >= 1")
        for dotted in ("env.dim", "env.arms", "env.sub_reward", "env.dataset"):
            value = self.get(dotted)
            if isinstance(value, list):
                _require(len(value) == k, dotted, f"needs one value per bandit ({k}), got {len(value)}")
        for dotted in ("env.dim", "env.arms"):
            _require(all(v >= 1 for v in self.per_bandit(dotted)), dotted, "must be >= 1")
        for kind in self.per_bandit("env.sub_reward"):
            _require(kind in SUB_REWARD_KINDS, "env.sub_reward", f"unknown kind {kind!r}")
        _require(self.env.final_reward in FINAL_REWARD_KINDS, "env.final_reward", "unknown final reward")
        _require(self.env.arm_generation in ARM_GENERATIONS, "env.arm_generation", "unknown arm generation")
        if self.env.final_reward == "weighted":
            assert self.env.weights is not None
            _require(len(self.env.weights) == k, "env.weights", f"needs {k} weights")
        if isinstance(self.env.c_bar, str):
            _require(self.env.c_bar == "auto", "env.c_bar", "must be a number or \"auto\"")
            _require(self.env.final_reward != "nonlinear_sqrt", "env.c_bar", "nonlinear_sqrt needs an explicit value")
        else:
            _require(float(self.env.c_bar or 0) > 0, "env.c_bar", "must be > 0")
        _require(float(self.env.noise_sigma or 0) >= 0, "env.noise_sigma", "must be >= 0")
        _require(float(self.env.sub_noise_sigma or 0) >= 0, "env.sub_noise_sigma", "must be >= 0")
        mask = self.mask()
        if isinstance(mask, str):
            _require(mask in ("all", "none"), "env.mask", "must be \"all\", \"none\" or a list of bandits")
        else:
            _require(all(0 <= i < k for i in mask), "env.mask", f"bandit indices must lie in 0..{k - 1}")
        _require((self.env.dataset_classes or 0) >= 0, "env.dataset_classes", "must be >= 0")
        if self.env.arm_generation == "dataset":
            for path in self.dataset_paths():
                _require(path.is_file(), "env.dataset", f"file {path} does not exist")

        _require(self.agent.kind in POLICIES, "agent.kind", f"unknown agent (known: {', '.join(POLICIES)})")
        for kind in self.agent_kinds():
            _require(kind in POLICIES, "run.agents", f"unknown agent {kind!r}")
        for dotted in (
            "agent.sub_depth",
            "agent.sub_width",
            "agent.shared_depth",
            "agent.shared_width",
            "agent.neuucb_depth",
            "agent.neuucb_width",
            "agent.train_every",
            "agent.combination_cap",
        ):
            _require(int(self.get(dotted) or 0) >= 1, dotted, "must be >= 1")
        for dotted in ("agent.steps", "agent.step_backoffs", "agent.max_history", "agent.kernel_budget"):
            _require(int(self.get(dotted) or 0) >= 0, dotted, "must be >= 0")
        for dotted in ("agent.eta", "agent.alpha", "agent.norm_bound", "agent.exploration"):
            _require(float(self.get(dotted) or 0) >= 0, dotted, "must be >= 0")
        for dotted in ("agent.lambda_reg", "agent.kernel_bandwidth"):
            _require(float(self.get(dotted) or 0) > 0, dotted, "must be > 0")
        _require(self.agent.ucb_mode in UCB_MODES, "agent.ucb_mode", f"must be one of {', '.join(UCB_MODES)}")
        _require(self.agent.schedule in SCHEDULES, "agent.schedule", f"must be one of {', '.join(SCHEDULES)}")
        _require(0 <= float(self.agent.schedule_constant or 0) <= 1, "agent.schedule_constant", "must lie in [0, 1]")
        _require(0 < float(self.agent.delta or 0) < 1, "agent.delta", "must lie in (0, 1)")

        _require((self.run.rounds or 0) >= 1, "run.rounds", "must be >= 1")
        _require(bool(self.run.seeds), "run.seeds", "needs at least one seed")
        _require((self.run.threads or 0) >= 0, "run.threads", "must be >= 0")


@dataclass
class Profile:
    fields: Config
    description: str


def _profile(profile: str | None = None, **sections: dict[str, RawConfigType]) -> Config:
    config = Config(profile=profile)
    for section, values in sections.items():
        for name, value in values.items():
            config.set(f"{section}.{name}", value)
    return config


PROFILES: dict[str, Profile] = {
    "default": Profile(
        _profile(
            env={
                "bandits": 2,
                "dim": 10,
                "arms": 10,
                "sub_reward": "linear",
                "final_reward": "h1_sum",
                "weights": [],
                "c_bar": "auto",
                "noise_sigma": 0.05,
                "sub_noise_sigma": 0.0,
                "mask": "all",
                "arm_generation": "unit_ball",
                "dataset": "",
                "dataset_classes": 0,
            },
            agent={
                "kind": "mufasa",
                "sub_depth": 2,
                "sub_width": 32,
                "shared_depth": 2,
                "shared_width": 32,
                "shared_net": True,
                "zero_init_mode": True,
                "neuucb_depth": 2,
                "neuucb_width": 32,
                "eta": 0.01,
                "steps": 100,
                "lambda_reg": 1.0,
                "normalize_step": True,
                "warm_start": True,
                "step_backoffs": 20,
                "train_every": 50,
                "max_history": 0,
                "recompute_design": False,
                "ucb_mode": "empirical",
                "schedule": "inv_sqrt",
                "exploration": 0.1,
                "schedule_constant": 0.5,
                "delta": 0.1,
                "norm_bound": 1.0,
                "c_l": 1.0,
                "c_1": 1.0,
                "c_2": 1.0,
                "alpha": 1.0,
                "kernel_bandwidth": 1.0,
                "kernel_beta": 1.0,
                "kernel_budget": 1000,
                "combination_cap": 1_000_000,
            },
            run={
                "rounds": 2000,
                "seeds": [0],
                "outdir": "mufasa-out",
                "agents": [],
                "threads": 0,
                "save_model": False,
            },
        ),
        """
        Desk-scale defaults: two bandits of ten arms each with linear sub-rewards
        summed into the final reward, and networks of width 32 so that a run of
        2000 rounds finishes in minutes.

        Training follows the usual bandit settings: η = 0.01, J = 100 steps,
        retraining every 50 rounds, δ = 0.1 and λ = 1.
        """,
    ),
    "full": Profile(
        _profile(
            agent={
                "sub_width": 100,
                "shared_width": 100,
                "neuucb_depth": 4,
                "neuucb_width": 100,
            },
            run={
                "seeds": [0, 1, 2, 3, 4],
                "agents": ["mufasa", "neuucb", "linucb", "kerucb"],
            },
        ),
        """
        Full-width networks: two-layer per-bandit and shared networks of width 100,
        four-layer K-NeuUCB networks of width 100, and all four learners compared
        over five seeds.

        Per-bandit networks keep a scalar output, so every bandit has its own
        gradient-based confidence term.
        """,
    ),
}
