from hypothesis import settings

# first calls pay for numba compilation, so per-example deadlines are noise
settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")
