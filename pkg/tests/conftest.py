import hypothesis

hypothesis.settings.register_profile(
    "apfp", hypothesis.settings(max_examples=25, deadline=None)
)
hypothesis.settings.load_profile("apfp")
