"""Contextual environment families: Nav2D, Minigolf, CartPole, SwingUp.

Each family exposes context-conditioned dynamics, reward, termination and the
uniform context sampling box. Single-step functions operate on one state;
EnvInstance.step_batch vectorizes over a batch of episodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rl import MdpDescriptor, RngStream

GRAVITY_CARTPOLE = 9.8
GRAVITY_GOLF = 9.81

NAV2D_VMAX = 0.1
NAV2D_DTHRESH = 0.01

GOLF_BALL_RADIUS = 0.02135
GOLF_HOLE_DIAMETER = 0.10
GOLF_ACTION_LOW = 1e-5
GOLF_ACTION_HIGH = 10.0
GOLF_NOISE_STD = 0.5  # eps ~ N(0, 0.25) read as variance

CART_TAU = 0.02
CART_MASS = 1.0
CART_FORCE = 10.0
CART_ANGLE_THRESH = 12.0 * np.pi / 180.0
CART_X_THRESH = 2.4
SWINGUP_X_THRESH = 3.0
SWINGUP_POLE_LENGTH = 0.5
INIT_NOISE = 0.05


@dataclass(frozen=True)
class FamilyConfig:
    name: str
    state_dim: int
    action_dim: int
    horizon: int
    gamma: float
    reward_bound: float
    sigma: float
    h_range: tuple[float, float]
    context_low: tuple[float, ...]
    context_high: tuple[float, ...]
    context_names: tuple[str, ...]

    @property
    def context_dim(self) -> int:
        return len(self.context_low)

    def descriptor(self) -> MdpDescriptor:
        return MdpDescriptor(
            state_dim=self.state_dim,
            action_dim=self.action_dim,
            horizon=self.horizon,
            gamma=self.gamma,
            reward_bound=self.reward_bound,
        )


FAMILIES: dict[str, FamilyConfig] = {
    "nav2d": FamilyConfig(
        name="nav2d",
        state_dim=2,
        action_dim=2,
        horizon=10,
        gamma=0.99,
        reward_bound=3.0,
        sigma=1.001,
        h_range=(0.0, 8.0),
        context_low=(-0.5, -0.5),
        context_high=(0.5, 0.5),
        context_names=("x_goal", "y_goal"),
    ),
    "minigolf": FamilyConfig(
        name="minigolf",
        state_dim=1,
        action_dim=1,
        horizon=20,
        gamma=0.99,
        reward_bound=100.0,
        sigma=0.1,
        h_range=(0.0, 1.0),
        context_low=(0.7, 0.065),
        context_high=(1.0, 0.196),
        context_names=("putter_length", "friction"),
    ),
    "cartpole": FamilyConfig(
        name="cartpole",
        state_dim=4,
        action_dim=1,
        horizon=100,
        gamma=1.0,
        reward_bound=1.0,
        sigma=1.001,
        h_range=(0.0, 10.0),
        context_low=(0.1, 0.5),
        context_high=(2.0, 1.5),
        context_names=("m_pole", "l_pole"),
    ),
    "swingup": FamilyConfig(
        name="swingup",
        state_dim=4,
        action_dim=1,
        horizon=200,
        gamma=1.0,
        reward_bound=100.0,
        sigma=1.001,
        h_range=(0.0, 0.5),
        context_low=(0.1,),
        context_high=(2.0,),
        context_names=("m_pole",),
    ),
}


def family_config(family: str) -> FamilyConfig:
    try:
        return FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")


def sample_context(family: str, rng: RngStream | np.random.Generator) -> np.ndarray:
    cfg = family_config(family)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return gen.uniform(cfg.context_low, cfg.context_high)


def nav2d_step(state, action, context):
    """Move by the clipped velocity; reward is minus the post-move goal distance."""
    state = np.asarray(state, dtype=float)
    action = np.clip(np.asarray(action, dtype=float), -NAV2D_VMAX, NAV2D_VMAX)
    next_state = state + action
    dist = float(np.linalg.norm(next_state - np.asarray(context, dtype=float)))
    return next_state, -dist, dist < NAV2D_DTHRESH


def minigolf_step(x, a, context, rng):
    """One putt from distance x with force a; context = (putter length, friction)."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    length, friction = float(context[0]), float(context[1])
    a = float(np.clip(a, GOLF_ACTION_LOW, GOLF_ACTION_HIGH))
    x = float(x)
    eps = GOLF_NOISE_STD * gen.standard_normal()
    v = max(a * length**2 * (1.0 + eps), 0.0)
    decel = (5.0 / 7.0) * friction * GRAVITY_GOLF
    v_min = np.sqrt(2.0 * decel * x)
    v_max = np.sqrt(
        (2.0 * GOLF_HOLE_DIAMETER - GOLF_BALL_RADIUS) ** 2
        * GRAVITY_GOLF
        / (2.0 * GOLF_BALL_RADIUS)
        + v_min**2
    )
    if v > v_max:
        return x, -100.0, True
    if v >= v_min:
        return x, 0.0, True
    x_new = max(x - v**2 / (2.0 * decel), 0.0)
    return x_new, -1.0, False


def _pole_dynamics(state, force, m_pole, length):
    """Explicit Euler step of the classical cart-pole equations."""
    x, v, phi, phidot = state[..., 0], state[..., 1], state[..., 2], state[..., 3]
    total_mass = CART_MASS + m_pole
    pml = m_pole * length
    sin, cos = np.sin(phi), np.cos(phi)
    temp = (force + pml * phidot**2 * sin) / total_mass
    phi_acc = (GRAVITY_CARTPOLE * sin - cos * temp) / (
        length * (4.0 / 3.0 - m_pole * cos**2 / total_mass)
    )
    x_acc = temp - pml * phi_acc * cos / total_mass
    return np.stack(
        [
            x + CART_TAU * v,
            v + CART_TAU * x_acc,
            phi + CART_TAU * phidot,
            phidot + CART_TAU * phi_acc,
        ],
        axis=-1,
    )


def cartpole_step(state, action, context):
    """Balance reward: +1 per step; terminates past 12 degrees or |x| > 2.4."""
    state = np.asarray(state, dtype=float)
    m_pole, l_pole = float(context[0]), float(context[1])
    force = CART_FORCE if float(np.asarray(action).ravel()[0]) > 0 else -CART_FORCE
    next_state = _pole_dynamics(state, force, m_pole, l_pole)
    done = abs(next_state[2]) > CART_ANGLE_THRESH or abs(next_state[0]) > CART_X_THRESH
    return next_state, 1.0, bool(done)


def swingup_step(state, action, context):
    """Swing-up reward cos(phi); -100 and terminal when the cart leaves |x| <= 3."""
    state = np.asarray(state, dtype=float)
    m_pole = float(context[0])
    force = CART_FORCE if float(np.asarray(action).ravel()[0]) > 0 else -CART_FORCE
    next_state = _pole_dynamics(state, force, m_pole, SWINGUP_POLE_LENGTH)
    if abs(next_state[0]) > SWINGUP_X_THRESH:
        return next_state, -100.0, True
    return next_state, float(np.cos(next_state[2])), False


@dataclass(frozen=True)
class EnvInstance:
    family: str
    context: np.ndarray
    descriptor: MdpDescriptor

    def initial_states(self, n: int, gen: np.random.Generator) -> np.ndarray:
        if self.family == "nav2d":
            return np.zeros((n, 2))
        if self.family == "minigolf":
            return gen.uniform(0.0, 20.0, size=(n, 1))
        if self.family == "cartpole":
            return gen.uniform(-INIT_NOISE, INIT_NOISE, size=(n, 4))
        if self.family == "swingup":
            base = np.array([0.0, 0.0, np.pi, 0.0])
            return base + gen.uniform(-INIT_NOISE, INIT_NOISE, size=(n, 4))
        raise ValueError(f"unknown family {self.family!r}")

    def step_batch(self, states, actions, gen):
        """Vectorized step; returns (next_states, rewards, done) over the batch."""
        states = np.asarray(states, dtype=float)
        actions = np.asarray(actions, dtype=float)
        if self.family == "nav2d":
            moves = np.clip(actions, -NAV2D_VMAX, NAV2D_VMAX)
            next_states = states + moves
            dist = np.linalg.norm(next_states - self.context[None, :], axis=1)
            return next_states, -dist, dist < NAV2D_DTHRESH
        if self.family == "minigolf":
            length, friction = self.context
            x = states[:, 0]
            a = np.clip(actions[:, 0], GOLF_ACTION_LOW, GOLF_ACTION_HIGH)
            eps = GOLF_NOISE_STD * gen.standard_normal(len(x))
            v = np.maximum(a * length**2 * (1.0 + eps), 0.0)
            decel = (5.0 / 7.0) * friction * GRAVITY_GOLF
            v_min = np.sqrt(2.0 * decel * x)
            v_max = np.sqrt(
                (2.0 * GOLF_HOLE_DIAMETER - GOLF_BALL_RADIUS) ** 2
                * GRAVITY_GOLF
                / (2.0 * GOLF_BALL_RADIUS)
                + v_min**2
            )
            overshoot = v > v_max
            holed = (~overshoot) & (v >= v_min)
            rewards = np.where(overshoot, -100.0, np.where(holed, 0.0, -1.0))
            x_new = np.where(
                overshoot | holed, x, np.maximum(x - v**2 / (2.0 * decel), 0.0)
            )
            return x_new[:, None], rewards, overshoot | holed
        if self.family in ("cartpole", "swingup"):
            if self.family == "cartpole":
                m_pole, length = self.context
            else:
                m_pole, length = self.context[0], SWINGUP_POLE_LENGTH
            force = np.where(actions[:, 0] > 0, CART_FORCE, -CART_FORCE)
            next_states = _pole_dynamics(states, force, m_pole, length)
            if self.family == "cartpole":
                done = (np.abs(next_states[:, 2]) > CART_ANGLE_THRESH) | (
                    np.abs(next_states[:, 0]) > CART_X_THRESH
                )
                rewards = np.ones(len(states))
            else:
                done = np.abs(next_states[:, 0]) > SWINGUP_X_THRESH
                rewards = np.where(done, -100.0, np.cos(next_states[:, 2]))
            return next_states, rewards, done
        raise ValueError(f"unknown family {self.family!r}")


def make_env(family: str, context: np.ndarray) -> EnvInstance:
    cfg = family_config(family)
    context = np.asarray(context, dtype=float)
    if context.shape != (cfg.context_dim,):
        raise ValueError(
            f"{family} context must have shape ({cfg.context_dim},), got {context.shape}"
        )
    return EnvInstance(family=family, context=context, descriptor=cfg.descriptor())
