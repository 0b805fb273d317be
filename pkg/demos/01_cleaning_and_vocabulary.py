"""
Text cleaning and domain-token vocabulary extension
===================================================

Walks a handful of raw posts through the cleaning rules, builds a subword
vocabulary from a synthetic corpus, and shows what extending it with the
six domain tokens does to their segmentation.
"""

from newsclf import synthdata
from newsclf import tokenizer as tok
from newsclf.textprep import clean_dataset, clean_text, load_stopwords

stopwords = load_stopwords()

raw = [
    "Wearing mask can protect you from the virus.",
    "see https://t.co/xyz COVID-19!!",
    "BREAKING: @WHO confirms 5G towers do NOT spread #coronavirus",
]
print("cleaning")
for text in raw:
    print(f"  {text!r}")
    print(f"    -> {clean_text(text, stopwords)!r}")

# a corpus that never mentions the pandemic, so the domain tokens are
# guaranteed to be out of vocabulary
train, _ = synthdata.separable_corpus(300, 10, seed=0)
cleaned = clean_dataset(train, stopwords)
vocab = tok.build_vocab((ex.tokens_text for ex in cleaned), 200)
print(f"\nbase vocabulary: {len(vocab)} tokens")

for word in tok.DEFAULT_DOMAIN_TOKENS:
    pieces = tok.encode(word, vocab, max_len=32).true_length - 1
    print(f"  {word:>18} splits into {pieces} pieces")

extended, added = tok.extend_vocab(vocab, tok.DEFAULT_DOMAIN_TOKENS)
print(f"\nextended vocabulary: {len(extended)} tokens ({added} added)")
for word in tok.DEFAULT_DOMAIN_TOKENS:
    seq = tok.encode(word, extended, max_len=32)
    print(f"  {word:>18} -> single id {seq.ids[1]}")

# which words does a too-small vocabulary fragment the most? the usual
# shortlist source for picking new domain tokens on real data
small = tok.build_vocab((ex.tokens_text for ex in cleaned), 80)
print("\nmost fragmented corpus words under an 80-token vocabulary")
for word, freq, pieces in tok.top_split_tokens((ex.tokens_text for ex in cleaned), small, k=5):
    print(f"  {word:>18} seen {freq}x, {pieces} pieces")
