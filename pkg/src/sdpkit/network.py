"""The parser network: embeddings, deep BiLSTM encoder, FNN heads, bilinear scorers.

A token vector is the concatenation of a word component, a POS embedding, and
optional external context features. The word component sums a trainable table,
a fixed pretrained table, and a character BiLSTM's final states (no projection,
so the char hidden size is half the word dimension per direction). A learned
root row is prepended before encoding; scores are matrices over head positions
0..n and dependent positions 1..n with self-loops masked to a large negative.

In multitask mode the embedding layer is always shared; the recurrent stack
and the four attention FNNs are shared or task-specific according to the
`SharingTopology`, with an optional extra task-specific recurrent layer on
top of a shared stack. Bilinear scorers are always task-specific.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import CheckpointError, ConfigError
from .graph import TOP_LABEL, Token

NEG_SCORE = -1e9
UNK = "<unk>"

SEMANTIC = "semantic"
SYNTACTIC = "syntactic"


@dataclass(frozen=True)
class NetworkConfig:
    word_dim: int = 100
    pos_dim: int = 100
    rnn_size: int = 600          # concatenated output, half per direction
    rnn_layers: int = 3
    fnn_size: int = 600
    char_emb_dim: int = 0        # 0 means word_dim // 2
    context_dim: int = 0
    word_dropout: float = 0.2    # input word/POS replacement rate
    recurrent_dropout: float = 0.25
    edge_dropout: float = 0.25
    label_dropout: float = 0.33
    biaffine_bias: bool = False

    def __post_init__(self):
        for name in ("word_dim", "pos_dim", "rnn_size", "rnn_layers", "fnn_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.word_dim % 2 != 0:
            raise ConfigError("word_dim must be even (char BiLSTM uses word_dim/2 per direction)")
        if self.rnn_size % 2 != 0:
            raise ConfigError("rnn_size must be even (half per direction)")
        if self.context_dim < 0 or self.char_emb_dim < 0:
            raise ConfigError("dims must be non-negative")
        for name in ("word_dropout", "recurrent_dropout", "edge_dropout", "label_dropout"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"{name} must be in [0,1), got {rate}")

    @property
    def char_dim(self) -> int:
        return self.char_emb_dim if self.char_emb_dim else self.word_dim // 2

    @property
    def input_dim(self) -> int:
        return self.word_dim + self.pos_dim + self.context_dim


@dataclass(frozen=True)
class SharingTopology:
    shared_rnn: bool = True
    shared_fnn: bool = False
    task_rnn: bool = False

    def __post_init__(self):
        if self.task_rnn and not self.shared_rnn:
            raise ConfigError("task_rnn requires shared_rnn")


class Vocab:
    """A deterministic string-to-index map; optionally with <unk> at index 0."""

    def __init__(self, items: Sequence[str], unk: bool = True):
        self.unk = unk
        items = sorted(set(items) - ({UNK} if unk else set()))
        self.items = ([UNK] if unk else []) + items
        self._index = {s: i for i, s in enumerate(self.items)}
        if len(self._index) != len(self.items):
            raise ConfigError("duplicate vocabulary items")

    def __len__(self):
        return len(self.items)

    def __contains__(self, item):
        return item in self._index

    def id(self, item: str) -> int:
        idx = self._index.get(item)
        if idx is None:
            if not self.unk:
                raise ConfigError(f"unknown item {item!r} in a closed vocabulary")
            return 0
        return idx

    def value(self, idx: int) -> str:
        return self.items[idx]


def build_vocabs(sentences: Sequence[Sequence[Token]]) -> tuple[Vocab, Vocab, Vocab]:
    """Word, character, and POS vocabularies from a corpus of token sequences."""
    words, chars, pos = set(), set(), set()
    for sent in sentences:
        for tok in sent:
            words.add(tok.form)
            chars.update(tok.form)
            pos.add(tok.pos)
    return Vocab(sorted(words)), Vocab(sorted(chars)), Vocab(sorted(pos))


def semantic_label_vocab(labels: Sequence[str]) -> Vocab:
    """Closed label vocabulary for the semantic task; TOP is always a member."""
    return Vocab(sorted(set(labels) | {TOP_LABEL}), unk=False)


def syntactic_label_vocab(labels: Sequence[str]) -> Vocab:
    return Vocab(sorted(set(labels)), unk=False)


def pretrained_table(vectors: dict[str, np.ndarray], vocab: Vocab,
                     dim: int) -> np.ndarray:
    """Fixed pretrained embedding table aligned to a word vocabulary.

    Words without a pretrained vector (including <unk>) get zero rows, so
    the trainable and character components alone carry them.
    """
    table = np.zeros((len(vocab), dim))
    for i, word in enumerate(vocab.items):
        vec = vectors.get(word)
        if vec is not None:
            if vec.shape != (dim,):
                raise ConfigError(f"pretrained vector for {word!r} has shape "
                                  f"{vec.shape}, expected ({dim},)")
            table[i] = vec
    return table


def _rng_for(seed: int, name: str) -> np.random.Generator:
    # per-name streams keep initial values independent of creation order,
    # so single-task and multitask models share identical common parameters
    return np.random.default_rng([seed & 0x7FFFFFFF, zlib.crc32(name.encode("utf-8"))])


FNN_TYPES = ("edge_dep", "edge_head", "label_dep", "label_head")


class ParserModel:
    """All trainable state plus the forward operations of the parser."""

    def __init__(self, config: NetworkConfig, tasks: dict[str, Vocab],
                 word_vocab: Vocab, char_vocab: Vocab, pos_vocab: Vocab,
                 topology: SharingTopology | None = None, seed: int = 0,
                 pretrained: np.ndarray | None = None):
        if not tasks:
            raise ConfigError("at least one task is required")
        unknown = set(tasks) - {SEMANTIC, SYNTACTIC}
        if unknown:
            raise ConfigError(f"unknown tasks {sorted(unknown)}")
        if len(tasks) > 1 and topology is None:
            raise ConfigError("multitask models need a SharingTopology")
        self.config = config
        self.topology = topology if len(tasks) > 1 else None
        self.tasks = dict(tasks)
        self.word_vocab = word_vocab
        self.char_vocab = char_vocab
        self.pos_vocab = pos_vocab
        self.seed = seed
        if pretrained is None:
            pretrained = np.zeros((len(word_vocab), config.word_dim))
        pretrained = np.asarray(pretrained, dtype=np.float64)
        if pretrained.shape != (len(word_vocab), config.word_dim):
            raise ConfigError(f"pretrained table shape {pretrained.shape} != "
                              f"({len(word_vocab)}, {config.word_dim})")
        self.pretrained = pretrained  # fixed; never updated
        self.params: dict[str, Parameter] = {}
        self._build_params()

    # ------------------------------------------------------------------ setup

    def _embedding(self, name: str, rows: int, cols: int) -> Parameter:
        rng = _rng_for(self.seed, name)
        return self._register(name, rng.normal(0.0, 0.1, size=(rows, cols)))

    def _vector(self, name: str, dim: int, scale: float = 0.1) -> Parameter:
        rng = _rng_for(self.seed, name)
        return self._register(name, rng.normal(0.0, scale, size=dim))

    def _glorot(self, name: str, rows: int, cols: int) -> Parameter:
        rng = _rng_for(self.seed, name)
        limit = np.sqrt(6.0 / (rows + cols))
        return self._register(name, rng.uniform(-limit, limit, size=(rows, cols)))

    def _glorot3(self, name: str, slices: int, rows: int, cols: int) -> Parameter:
        rng = _rng_for(self.seed, name)
        limit = np.sqrt(6.0 / (rows + cols))
        return self._register(name, rng.uniform(-limit, limit, size=(slices, rows, cols)))

    def _zeros(self, name: str, dim: int) -> Parameter:
        return self._register(name, np.zeros(dim))

    def _register(self, name: str, data: np.ndarray) -> Parameter:
        if name in self.params:
            raise ConfigError(f"duplicate parameter {name!r}")
        p = Parameter(data, name=name)
        self.params[name] = p
        return p

    def _lstm_params(self, prefix: str, d_in: int, hidden: int):
        for direction in ("fw", "bw"):
            self._glorot(f"{prefix}/{direction}/w", d_in, 4 * hidden)
            self._glorot(f"{prefix}/{direction}/u", hidden, 4 * hidden)
            self._zeros(f"{prefix}/{direction}/b", 4 * hidden)

    def _rnn_owner(self, task: str) -> str:
        if self.topology is None:
            return task
        return "shared" if self.topology.shared_rnn else task

    def _fnn_owner(self, task: str) -> str:
        if self.topology is None:
            return task
        return "shared" if self.topology.shared_fnn else task

    def _build_params(self):
        cfg = self.config
        self._embedding("emb/word", len(self.word_vocab), cfg.word_dim)
        self._embedding("emb/pos", len(self.pos_vocab), cfg.pos_dim)
        self._embedding("emb/char", len(self.char_vocab), cfg.char_dim)
        self._vector("emb/unk_word", cfg.word_dim)
        self._vector("emb/unk_pos", cfg.pos_dim)
        self._vector("emb/root", cfg.input_dim)
        half_word = cfg.word_dim // 2
        self._lstm_params("char_rnn", cfg.char_dim, half_word)

        half = cfg.rnn_size // 2
        rnn_owners = {self._rnn_owner(task) for task in self.tasks}
        for owner in sorted(rnn_owners):
            d_in = cfg.input_dim
            for layer in range(cfg.rnn_layers):
                self._lstm_params(f"rnn/{owner}/layer{layer}", d_in, half)
                d_in = cfg.rnn_size
        if self.topology is not None and self.topology.task_rnn:
            for task in sorted(self.tasks):
                self._lstm_params(f"rnn_task/{task}", cfg.rnn_size, half)

        fnn_owners = {self._fnn_owner(task) for task in self.tasks}
        for owner in sorted(fnn_owners):
            for kind in FNN_TYPES:
                self._glorot(f"fnn/{owner}/{kind}/w", cfg.rnn_size, cfg.fnn_size)
                self._zeros(f"fnn/{owner}/{kind}/b", cfg.fnn_size)

        for task in sorted(self.tasks):
            labels = self.tasks[task]
            self._glorot(f"scorer/{task}/edge", cfg.fnn_size, cfg.fnn_size)
            self._glorot3(f"scorer/{task}/label", len(labels), cfg.fnn_size, cfg.fnn_size)
            if cfg.biaffine_bias:
                self._vector(f"scorer/{task}/edge_bias_dep", cfg.fnn_size, scale=0.0)
                self._vector(f"scorer/{task}/edge_bias_head", cfg.fnn_size, scale=0.0)
                self._vector(f"scorer/{task}/edge_bias", 1, scale=0.0)

    def parameters(self) -> list[Parameter]:
        return [self.params[name] for name in sorted(self.params)]

    # ---------------------------------------------------------------- forward

    def _char_vector(self, form: str) -> Tensor:
        ids = np.array([self.char_vocab.id(c) for c in form], dtype=np.int64)
        emb = ad.lookup(self.params["emb/char"], ids)
        fw = ad.lstm_seq(emb, self.params["char_rnn/fw/w"],
                         self.params["char_rnn/fw/u"], self.params["char_rnn/fw/b"])
        bw = ad.lstm_seq(ad.flip_rows(emb), self.params["char_rnn/bw/w"],
                         self.params["char_rnn/bw/u"], self.params["char_rnn/bw/b"])
        last_f = ad.slice_rows(fw, len(form) - 1, len(form))
        last_b = ad.slice_rows(bw, len(form) - 1, len(form))
        return ad.concat([last_f, last_b], axis=1)

    def embed_tokens(self, sentence: Sequence[Token], train: bool = False,
                     rng: np.random.Generator | None = None,
                     context: np.ndarray | None = None,
                     char_cache: dict[str, Tensor] | None = None,
                     word_drop_mask: np.ndarray | None = None,
                     pos_drop_mask: np.ndarray | None = None) -> Tensor:
        """Token input matrix of shape (n, word_dim + pos_dim + context_dim).

        The word component sums the trainable table row, the fixed pretrained
        row, and the char BiLSTM vector. In train mode each token's word and
        POS components are independently replaced by dedicated unknown
        embeddings at the configured word-dropout rate (masks can be injected
        explicitly for testing). `char_cache` shares char vectors across a
        batch; it is exact because the char BiLSTM carries no dropout.
        """
        cfg = self.config
        n = len(sentence)
        if n == 0:
            raise ConfigError("cannot embed an empty sentence")
        word_ids = np.array([self.word_vocab.id(t.form) for t in sentence], dtype=np.int64)
        pos_ids = np.array([self.pos_vocab.id(t.pos) for t in sentence], dtype=np.int64)

        x_re = ad.lookup(self.params["emb/word"], word_ids)
        x_pe = ad.constant(self.pretrained[word_ids])
        char_rows = []
        for tok in sentence:
            if char_cache is not None and tok.form in char_cache:
                char_rows.append(char_cache[tok.form])
                continue
            vec = self._char_vector(tok.form)
            if char_cache is not None:
                char_cache[tok.form] = vec
            char_rows.append(vec)
        x_ce = char_rows[0] if n == 1 else ad.concat(char_rows, axis=0)
        x_we = ad.add(ad.add(x_re, x_pe), x_ce)

        x_te = ad.lookup(self.params["emb/pos"], pos_ids)

        if train and (cfg.word_dropout > 0 or word_drop_mask is not None
                      or pos_drop_mask is not None):
            if word_drop_mask is None or pos_drop_mask is None:
                if rng is None:
                    raise ConfigError("train-mode embedding needs an rng")
                if word_drop_mask is None:
                    word_drop_mask = rng.random(n) >= cfg.word_dropout
                if pos_drop_mask is None:
                    pos_drop_mask = rng.random(n) >= cfg.word_dropout
            keep_w = ad.constant(np.asarray(word_drop_mask, dtype=np.float64).reshape(n, 1))
            keep_t = ad.constant(np.asarray(pos_drop_mask, dtype=np.float64).reshape(n, 1))
            unk_w = ad.reshape(self.params["emb/unk_word"], (1, cfg.word_dim))
            unk_t = ad.reshape(self.params["emb/unk_pos"], (1, cfg.pos_dim))
            x_we = ad.add(ad.mul(x_we, keep_w),
                          ad.mul(unk_w, ad.constant(1.0 - keep_w.data)))
            x_te = ad.add(ad.mul(x_te, keep_t),
                          ad.mul(unk_t, ad.constant(1.0 - keep_t.data)))

        parts = [x_we, x_te]
        if cfg.context_dim:
            if context is None:
                raise ConfigError("model was configured with context vectors; none given")
            context = np.asarray(context, dtype=np.float64)
            if context.shape != (n, cfg.context_dim):
                raise ConfigError(f"context shape {context.shape} != ({n}, {cfg.context_dim})")
            parts.append(ad.constant(context))
        elif context is not None:
            raise ConfigError("context vectors given but context_dim is 0")
        return ad.concat(parts, axis=1)

    def _bilstm_layer(self, x: Tensor, prefix: str) -> Tensor:
        fw = ad.lstm_seq(x, self.params[f"{prefix}/fw/w"],
                         self.params[f"{prefix}/fw/u"], self.params[f"{prefix}/fw/b"])
        bw = ad.flip_rows(ad.lstm_seq(ad.flip_rows(x), self.params[f"{prefix}/bw/w"],
                                      self.params[f"{prefix}/bw/u"],
                                      self.params[f"{prefix}/bw/b"]))
        return ad.concat([fw, bw], axis=1)

    def encode(self, embedded: Tensor, task: str, train: bool = False,
               rng: np.random.Generator | None = None) -> Tensor:
        """Recurrent states for positions 0..n; row 0 is the learned root."""
        self._check_task(task)
        cfg = self.config
        if train and cfg.recurrent_dropout > 0 and rng is None:
            raise ConfigError("train-mode encode needs an rng")
        root = ad.reshape(self.params["emb/root"], (1, cfg.input_dim))
        states = ad.concat([root, embedded], axis=0)
        owner = self._rnn_owner(task)
        for layer in range(cfg.rnn_layers):
            if layer > 0 and train and cfg.recurrent_dropout > 0:
                states = ad.dropout(states, cfg.recurrent_dropout, rng)
            states = self._bilstm_layer(states, f"rnn/{owner}/layer{layer}")
        if self.topology is not None and self.topology.task_rnn:
            if train and cfg.recurrent_dropout > 0:
                states = ad.dropout(states, cfg.recurrent_dropout, rng)
            states = self._bilstm_layer(states, f"rnn_task/{task}")
        return states

    def score_edges_labels(self, states: Tensor, task: str, train: bool = False,
                           rng: np.random.Generator | None = None
                           ) -> tuple[Tensor, Tensor]:
        """Edge scores (n+1, n) and label scores (|L|, n+1, n) for one task.

        Row i is the head position (0 = root), column j-1 the dependent.
        Diagonal cells (i == j) are masked to a large negative score so
        decoding and head softmaxes never select self-loops.
        """
        self._check_task(task)
        cfg = self.config
        if train and rng is None and (cfg.edge_dropout > 0 or cfg.label_dropout > 0):
            raise ConfigError("train-mode scoring needs an rng")
        owner = self._fnn_owner(task)
        n_plus_1 = states.shape[0]
        n = n_plus_1 - 1

        heads = {}
        for kind in FNN_TYPES:
            h = ad.tanh(ad.add(ad.matmul(states, self.params[f"fnn/{owner}/{kind}/w"]),
                               self.params[f"fnn/{owner}/{kind}/b"]))
            if train:
                rate = cfg.edge_dropout if kind.startswith("edge") else cfg.label_dropout
                if rate > 0:
                    h = ad.dropout(h, rate, rng)
            heads[kind] = h

        edge_dep = ad.slice_rows(heads["edge_dep"], 1, n_plus_1)
        label_dep = ad.slice_rows(heads["label_dep"], 1, n_plus_1)

        # written form: score(i, j) = h_i^(dep) W h_j^(head); stored as [head, dep]
        s_edge = ad.transpose(ad.bilinear(edge_dep, self.params[f"scorer/{task}/edge"],
                                          heads["edge_head"]))
        if cfg.biaffine_bias:
            dep_bias = ad.matmul(edge_dep,
                                 ad.reshape(self.params[f"scorer/{task}/edge_bias_dep"],
                                            (cfg.fnn_size, 1)))
            head_bias = ad.matmul(heads["edge_head"],
                                  ad.reshape(self.params[f"scorer/{task}/edge_bias_head"],
                                             (cfg.fnn_size, 1)))
            s_edge = ad.add(s_edge, ad.transpose(dep_bias))
            s_edge = ad.add(s_edge, head_bias)
            s_edge = ad.add(s_edge, ad.reshape(self.params[f"scorer/{task}/edge_bias"], (1, 1)))

        s_label = ad.transpose(ad.bilinear(label_dep, self.params[f"scorer/{task}/label"],
                                           heads["label_head"]), (0, 2, 1))

        diag = np.zeros((n_plus_1, n))
        for j in range(1, n + 1):
            diag[j, j - 1] = 1.0
        keep = ad.constant(1.0 - diag)
        fill = ad.constant(diag * NEG_SCORE)
        s_edge = ad.add(ad.mul(s_edge, keep), fill)
        s_label = ad.add(ad.mul(s_label, keep), fill)
        return s_edge, s_label

    def forward(self, sentence: Sequence[Token], task: str, train: bool = False,
                rng: np.random.Generator | None = None,
                context: np.ndarray | None = None,
                char_cache: dict | None = None) -> tuple[Tensor, Tensor]:
        x = self.embed_tokens(sentence, train=train, rng=rng, context=context,
                              char_cache=char_cache)
        states = self.encode(x, task, train=train, rng=rng)
        return self.score_edges_labels(states, task, train=train, rng=rng)

    def _check_task(self, task: str):
        if task not in self.tasks:
            raise ConfigError(f"model has no task {task!r} (tasks: {sorted(self.tasks)})")

    # ------------------------------------------------------------- checkpoint

    def save(self, path):
        meta = {
            "kind": "sdpkit-parser",
            "config": asdict(self.config),
            "topology": asdict(self.topology) if self.topology else None,
            "seed": self.seed,
            "vocab": {
                "word": self.word_vocab.items,
                "char": self.char_vocab.items,
                "pos": self.pos_vocab.items,
            },
            "tasks": {task: vocab.items for task, vocab in self.tasks.items()},
        }
        arrays = {name: p.data for name, p in self.params.items()}
        arrays["pretrained"] = self.pretrained
        ad.save_arrays(path, arrays, meta)

    @classmethod
    def load(cls, path, expect_config: NetworkConfig | None = None,
             expect_topology: SharingTopology | None = None) -> "ParserModel":
        arrays, meta = ad.load_arrays(path)
        if meta.get("kind") != "sdpkit-parser":
            raise CheckpointError(f"{path}: not a parser checkpoint")
        config = NetworkConfig(**meta["config"])
        topology = SharingTopology(**meta["topology"]) if meta["topology"] else None
        if expect_config is not None and expect_config != config:
            raise CheckpointError(f"{path}: checkpoint config {config} does not match "
                                  f"expected {expect_config}")
        if expect_topology is not None and expect_topology != topology:
            raise CheckpointError(f"{path}: checkpoint topology {topology} does not "
                                  f"match expected {expect_topology}")

        def vocab_from(items, unk):
            v = Vocab.__new__(Vocab)
            v.unk = unk
            v.items = list(items)
            v._index = {s: i for i, s in enumerate(v.items)}
            return v

        tasks = {task: vocab_from(items, unk=False)
                 for task, items in meta["tasks"].items()}
        model = cls(config, tasks,
                    vocab_from(meta["vocab"]["word"], True),
                    vocab_from(meta["vocab"]["char"], True),
                    vocab_from(meta["vocab"]["pos"], True),
                    topology=topology, seed=meta["seed"],
                    pretrained=arrays.get("pretrained"))
        missing = set(model.params) - set(arrays)
        if missing:
            raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")
        for name, p in model.params.items():
            data = arrays[name]
            if data.shape != p.data.shape:
                raise CheckpointError(f"{path}: tensor {name} has shape {data.shape}, "
                                      f"expected {p.data.shape}")
            p.data = data.astype(p.data.dtype)
        return model
