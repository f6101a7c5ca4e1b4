import itertools
import math
from unittest.mock import patch

import numpy as np
import pytest

from densenav.env import EpisodeState, neighbors_of, observe, step
from densenav.fmp import FmpConfig, fmp_action, fmp_control
from densenav.geometry import surface_distance
from densenav.hybrid import HybridConfig, hybrid_action, select_mode
from densenav.models import ControllerMode, SwitchReason
from densenav.planners.hybrid import HybridPlanner
from densenav.policy import ActionSpace

SPACE_2D = ActionSpace.for_dimension(2)


def _expected(risk: bool, alone: bool, stuck: bool) -> SwitchReason:
    if risk:
        return SwitchReason.HIGH_RISK
    if alone:
        return SwitchReason.SIMPLE
    if stuck:
        return SwitchReason.STUCK
    return SwitchReason.NORMAL


class TestSelectMode:
    @pytest.mark.parametrize(
        ("risk", "alone", "stuck"), list(itertools.product([False, True], repeat=3))
    )
    def test_precedence(self, make_agent, risk: bool, alone: bool, stuck: bool) -> None:
        agent = make_agent(0, (0.0, 0.0), (3.0, 0.0))
        neighbors = [] if alone else [make_agent(1, (0.0, 3.0)).observable()]

        with patch("densenav.hybrid.d_min", return_value=0.0 if risk else 10.0):
            decision = select_mode(agent, neighbors, 21 if stuck else 0, HybridConfig())

        assert decision.reason is _expected(risk, alone, stuck)
        normal = decision.reason is SwitchReason.NORMAL
        assert decision.mode is (ControllerMode.POLICY if normal else ControllerMode.FMP)

    def test_neighbor_inside_activation_radius(self, make_agent) -> None:
        agent = make_agent(0, (0.0, 0.0), (3.0, 0.0), v_pref=2.0)
        close = make_agent(1, (0.605, 0.0)).observable()

        assert select_mode(agent, [close], 0, HybridConfig()).reason is SwitchReason.HIGH_RISK

    def test_stuck_threshold_is_strict(self, make_agent) -> None:
        agent = make_agent(0, (0.0, 0.0), (3.0, 0.0))
        far = [make_agent(1, (0.0, 2.0)).observable()]

        assert select_mode(agent, far, 20, HybridConfig()).reason is SwitchReason.NORMAL
        assert select_mode(agent, far, 21, HybridConfig()).reason is SwitchReason.STUCK

    def test_stuck_trigger_can_be_disabled(self, make_agent) -> None:
        agent = make_agent(0, (0.0, 0.0), (3.0, 0.0))
        far = [make_agent(1, (0.0, 2.0)).observable()]
        config = HybridConfig(c_stuck=None)

        assert select_mode(agent, far, 10_000, config).reason is SwitchReason.NORMAL

    def test_lone_agent_is_simple_whatever_its_counter(self, make_agent) -> None:
        agent = make_agent(0, (0.0, 0.0), (3.0, 0.0))

        for counter in (0, 99):
            decision = select_mode(agent, [], counter, HybridConfig())
            assert decision.reason is SwitchReason.SIMPLE


class TestStuckRelease:
    @pytest.fixture
    def agent(self, make_agent):
        return make_agent(0, (0.0, 0.0), (3.0, 0.0))

    @pytest.fixture
    def far(self, make_agent):
        return [make_agent(1, (0.0, 2.0)).observable()]

    def test_stays_stuck_until_progress_is_made(self, agent, far) -> None:
        decision = select_mode(agent, far, 0, HybridConfig(), escape_from=3.5)

        assert decision.reason is SwitchReason.STUCK
        assert decision.mode is ControllerMode.FMP

    def test_released_after_enough_progress(self, agent, far) -> None:
        decision = select_mode(agent, far, 0, HybridConfig(), escape_from=4.5)

        assert decision.reason is SwitchReason.NORMAL

    def test_zero_release_hands_back_at_once(self, agent, far) -> None:
        config = HybridConfig(stuck_release=0.0)

        assert select_mode(agent, far, 0, config, escape_from=3.0).reason is SwitchReason.NORMAL

    def test_disabled_trigger_has_no_release_phase(self, agent, far) -> None:
        config = HybridConfig(c_stuck=None)

        assert select_mode(agent, far, 0, config, escape_from=10.0).reason is SwitchReason.NORMAL

    def test_high_risk_still_comes_first(self, make_agent, agent) -> None:
        close = [make_agent(1, (0.6001, 0.0)).observable()]

        decision = select_mode(agent, close, 0, HybridConfig(), escape_from=10.0)

        assert decision.reason is SwitchReason.HIGH_RISK

    def test_planner_keeps_the_mark_until_released(
        self, world_2d, make_agent, stop_model_2d
    ) -> None:
        state = EpisodeState(
            world=world_2d,
            agents=[
                make_agent(0, (0.0, 0.0), (3.0, 0.0)),
                make_agent(1, (0.0, 2.0), (3.0, 2.0)),
            ],
        )
        planner = HybridPlanner(stop_model_2d)
        state.stuck_counters[0] = 21

        first = planner.plan(state)
        state.stuck_counters[0] = 0
        second = planner.plan(state)

        assert first.reasons == {0: SwitchReason.STUCK, 1: SwitchReason.NORMAL}
        assert second.reasons[0] is SwitchReason.STUCK
        assert state.stuck_escapes == {0: 3.0}

        state.agents[0] = state.agents[0].replace(position=np.array([1.5, 0.0]))
        third = planner.plan(state)

        assert third.reasons[0] is SwitchReason.NORMAL
        assert state.stuck_escapes == {}


class TestHybridAction:
    def test_normal_mode_uses_greedy_policy(self, world_2d, make_agent, straight_model_2d) -> None:
        state = EpisodeState(
            world=world_2d,
            agents=[
                make_agent(0, (0.0, 0.0), (3.0, 0.0), v_pref=1.5),
                make_agent(1, (0.0, 2.0), (0.0, 3.0)),
            ],
        )

        action, decision = hybrid_action(
            state.agent(0),
            neighbors_of(state, 0),
            0,
            observe(state, 0),
            straight_model_2d,
            SPACE_2D,
            HybridConfig(),
            world_2d.dt,
        )

        assert decision.reason is SwitchReason.NORMAL
        assert (action.speed, action.dpsi, action.dphi) == (1.5, 0.0, 0.0)

    def test_simple_mode_runs_force_planner_without_repulsion(
        self, world_2d, make_agent, stop_model_2d
    ) -> None:
        agent = make_agent(0, (-3.0, 0.0), (3.0, 0.0), velocity=(0.5, 0.0))
        state = EpisodeState(world=world_2d, agents=[agent])

        action, decision = hybrid_action(
            agent, [], 0, observe(state, 0), stop_model_2d, SPACE_2D, HybridConfig(), world_2d.dt
        )

        assert decision.reason is SwitchReason.SIMPLE
        assert action == fmp_action(agent, [], FmpConfig(), world_2d.dt, repulsion=False)
        assert action.speed > 0

    def test_stuck_mode_runs_force_planner(self, world_2d, make_agent, stop_model_2d) -> None:
        agent = make_agent(0, (0.0, 0.0), (3.0, 0.0))
        state = EpisodeState(world=world_2d, agents=[agent, make_agent(1, (0.0, 2.0))])
        neighbors = neighbors_of(state, 0)

        action, decision = hybrid_action(
            agent, neighbors, 25, observe(state, 0), stop_model_2d, SPACE_2D, HybridConfig(), 0.1
        )

        assert decision.reason is SwitchReason.STUCK
        assert action == fmp_action(agent, neighbors, FmpConfig(), 0.1)

    def test_near_contact_pushes_apart(self, world_2d, make_agent, straight_model_2d) -> None:
        left = make_agent(0, (0.0, 0.0), (3.0, 0.0), velocity=(0.5, 0.0))
        right = make_agent(1, (0.603, 0.0), (-3.0, 0.0), velocity=(-0.5, 0.0), psi=math.pi)
        state = EpisodeState(world=world_2d, agents=[left, right])
        gap = surface_distance(left, right)

        actions = {}
        for agent_id in (0, 1):
            agent = state.agent(agent_id)
            neighbors = neighbors_of(state, agent_id)
            action, decision = hybrid_action(
                agent,
                neighbors,
                0,
                observe(state, agent_id),
                straight_model_2d,
                SPACE_2D,
                HybridConfig(),
                world_2d.dt,
            )
            assert decision.reason is SwitchReason.HIGH_RISK
            away = agent.position - neighbors[0].position
            assert float(fmp_control(agent, neighbors, FmpConfig()) @ away) > 0
            actions[agent_id] = action

        step(state, actions)

        assert surface_distance(state.agent(0), state.agent(1)) >= gap - 1e-12
        assert state.active_ids() == [0, 1]

    def test_bypassed_policy_is_never_evaluated(self, world_2d, make_agent, tiny_model_2d) -> None:
        agent = make_agent(0, (0.0, 0.0), (3.0, 0.0))
        state = EpisodeState(world=world_2d, agents=[agent])

        with patch("densenav.hybrid.forward") as forward:
            hybrid_action(
                agent, [], 0, observe(state, 0), tiny_model_2d, SPACE_2D, HybridConfig(), 0.1
            )

        forward.assert_not_called()

    def test_config_rejects_zero_threshold(self) -> None:
        with pytest.raises(ValueError):
            HybridConfig(c_stuck=0)

