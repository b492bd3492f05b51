import pytest

from lorafail import netsim

ACCEPTANCE_LINES: list[str] = []

# uniform(0, hi) end-to-end latency with P(L >= t) = p  =>  hi = t / (1 - p)
UPLINK_TRUTH = 0.503
DOWNLINK_TRUTH = 0.605


def uniform_exceedance_config(seed, uplinks, downlinks, p_up=UPLINK_TRUTH, p_down=DOWNLINK_TRUTH, **kw):
    """Sim config whose per-direction exceedance at 37 s / 42 s is exactly p_up / p_down."""
    zero = netsim.constant(0)
    return netsim.SimulationConfig(
        seed=seed,
        duration_seconds=float(uplinks),
        uplink_period_seconds=1.0,
        # expected count ~1.1x the cap so the cap always binds
        downlink_command_rate_per_minute=66.0 * downlinks / uplinks,
        downlink_command_limit=downlinks,
        uplink_hops={
            "device_gateway": netsim.uniform(0.0, 37.0 / (1.0 - p_up)),
            "gateway_network_server": zero,
            "network_server_application_server": zero,
        },
        downlink_hops={
            "application_server_network_server": zero,
            "network_server_gateway": zero,
            "gateway_device": netsim.uniform(0.0, 42.0 / (1.0 - p_down)),
        },
        **kw,
    )


@pytest.fixture
def record_acceptance():
    def record(name: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
