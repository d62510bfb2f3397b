"""Build a candidate pool from a toy dialogue corpus and inspect the LM bias.

The pool is the deduplicated universe of replies the retriever can suggest.
Each entry carries a length-normalized unigram log-probability: common phrasing
scores closer to zero, distinctive wording more negative, which is exactly the
signal used to damp overly specific replies at retrieval time.

Run: python demos/01_pool_and_bias.py
"""

import replyset as rs

corpus = [
    ("how are you ?", "i am good thanks ."),
    ("how was your day ?", "i am good thanks ."),        # duplicate reply
    ("what are you doing tonight ?", "nothing much , you ?"),
    ("do you want to get a drink ?", "sure , let's go !"),
    ("do you want to get lunch ?", "sure , let's go !"),  # duplicate reply
    ("where should we meet ?", "the little cafe on fifth avenue at noon"),
]
pairs = [rs.DialoguePair(i, c, r) for i, (c, r) in enumerate(corpus)]

pool = rs.build_candidate_pool(pairs)
print(f"{len(pairs)} (message, reply) pairs -> {len(pool)} distinct pool replies\n")

print(f"{'id':>3}  {'lm_bias':>9}  text")
for reply_id, (text, bias) in enumerate(zip(pool.replies, pool.lm_bias)):
    print(f"{reply_id:>3}  {bias:>9.4f}  {text}")

print(
    "\nNote how the long, specific reply about the cafe gets the most negative"
    "\nbias: every one of its tokens is rare on the reply side of the corpus."
    "\nAt retrieval time the biased score is dot(query, reply) + beta * lm_bias,"
    "\nso such replies need a stronger semantic match to surface."
)
