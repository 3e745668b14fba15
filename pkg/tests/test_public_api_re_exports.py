def test_public_api_re_exports():
    """Validate seaway.py re-exports the library surface used by the tests."""
    import seaway

    assert callable(seaway.main)
    for name in (
        "load_vessel_params",
        "discrete_step",
        "discrete_step_jacobians",
        "obstacle_h",
        "border_h",
        "realized_disturbance",
        "make_grid",
        "solve_qp",
        "solve",
        "check_gradients",
        "assemble",
        "solve_ocp",
        "worst_case_omega",
        "plan_step",
        "run_closed_loop",
        "compare_runs",
        "load_scenario",
        "write_log",
        "read_log",
        "get_scenario_with_source",
    ):
        assert callable(getattr(seaway, name)), name
    assert hasattr(seaway, "ControllerVariant")
    assert issubclass(seaway.ScenarioError, seaway.SeawayError)
    assert set(seaway.__all__) >= {"main", "OcpProblem", "TrajectoryLog"}
