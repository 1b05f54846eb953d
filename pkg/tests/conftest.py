import numpy as np
import pytest

from twem.embed import PAD_TOKEN, Vocabulary
from twem.model import TwemModel

EXAMPLE_TWEET = ("RT @AGuyNamed_Nick Now, I'm not sexist in any way shape or form but "
                    "I think women are better at gift wrapping. It's the XX chromosome thing")
# reference tokenizations of EXAMPLE_TWEET
BASIC = ("RT @AGuyNamed_Nick Now , I 'm not sexist in any way shape or form but I think "
         "women are better at gift wrapping . It 's the XX chromosome thing")
LOWER = ("rt @aguynamed_nick now , i 'm not sexist in any way shape or form but i think "
         "women are better at gift wrapping . it 's the xx chromosome thing")
REPLACE_REFERENCE = ("ENT USER now , I 'm not sexist in any way shape or form but I think "
                     "women are better at gift wrapping . It 's the xx chromosome thing")
REPLACE_LOWER = ("ENT USER now , i 'm not sexist in any way shape or form but i think "
                 "women are better at gift wrapping . it 's the xx chromosome thing")


def desk_model(V=20, D=8, hidden=10, C=3, dtype=np.float64, seed=0, max_len=5):
    """Small model with random (non-pretrained) embeddings."""
    rng = np.random.default_rng(seed)
    vocab = Vocabulary([PAD_TOKEN] + [f"w{i}" for i in range(1, V)])
    emb = rng.normal(scale=0.5, size=(V, D))
    emb[0] = 0.0
    model = TwemModel(vocab, emb.astype(dtype), [f"c{i}" for i in range(C)],
                      hidden=hidden, max_len=max_len, seed=seed, dtype=dtype)
    # nonzero biases so the check also covers them away from init
    for p in (model.proj_b, model.hidden1_b, model.hidden2_b, model.out_b):
        p.value[...] = rng.normal(scale=0.1, size=p.shape)
    return model


def random_batch(rng, B, T, V):
    indices = rng.integers(1, V, size=(B, T))
    lengths = rng.integers(1, T + 1, size=B)
    mask = (np.arange(T)[None, :] < lengths[:, None]).astype(np.int8)
    return np.where(mask == 1, indices, 0), mask


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    from twem.fixture import write_fixture
    out = tmp_path_factory.mktemp("fixture")
    write_fixture(out, seed=7)
    return out


# acceptance criteria: one summary line per test marked ``acceptance(n, title)``
_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    report = outcome.get_result()
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        details = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _ACCEPTANCE[number] = f"[{status}] criterion {number}: {title}" + (f"  ({details})" if details else "")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
