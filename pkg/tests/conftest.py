from hypothesis import settings

# Deterministic property runs: reruns of the suite must not wander.
settings.register_profile("suite", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("suite")
