import pytest


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A small randomly initialized BERT saved locally, so tests run offline."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()

    model_dir = tmp_path_factory.mktemp("tiny-bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + list("abcdefghijklmnopqrstuvwxyz")
    (model_dir / "vocab.txt").write_text("\n".join(vocab), encoding="utf-8")

    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.eval()
    model.save_pretrained(model_dir)
    BertTokenizer(str(model_dir / "vocab.txt"), model_max_length=64).save_pretrained(model_dir)
    return str(model_dir)
