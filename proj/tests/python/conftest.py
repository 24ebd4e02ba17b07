import pytest

import fexgan

TINY = """\
image_size = 32
latent_dim = 8
encoder_channels = 8,16,16,16,16
decoder_channels = 16,16,16,8
latent_dense = 16
affect_dense = 16
disc_channels = 8,16,32
batch_size = 4
total_steps = 3
checkpoint_every = 0
log_every = 0
seed = 3
"""


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    fexgan.generate_corpus(root, identities=2, frames=3, size=32, seed=5)
    return root


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory, corpus):
    run = tmp_path_factory.mktemp("run")
    cfg = run / "tiny.cfg"
    cfg.write_text(TINY + f"corpus_root = {corpus}\noutput_dir = {run / 'out'}\n")
    return fexgan.train(cfg)
