def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale runs on the 2000 x 300 synthetic dataset, "
                                       "deselect with -m 'not slow'")
