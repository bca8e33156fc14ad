#!/usr/bin/env python3
"""Regenerate crates/core/data/corpus.xml, the bundled labeled comment corpus.

The corpus is synthetic: short English wall comments assembled from
per-class templates and slot fillers, plus a handful of fixed sentences.
Output is deterministic for a given seed.

    python3 scripts/gen_corpus.py > crates/core/data/corpus.xml
"""

import random
import sys
from xml.sax.saxutils import escape, quoteattr

SEED = 20240501

# Fixed sentences that must appear verbatim with these labels.
FIXED = [
    ("I hate this woman", "hatred"),
    ("I had a good day", "neutral"),
    ("I want to see you without your respect", "offensive"),
]

COUNTS = {
    "neutral": 180,
    "sexual": 80,
    "hatred": 80,
    "offensive": 80,
    "pun_intended": 80,
}

PEOPLE = ["woman", "man", "guy", "girl", "neighbor", "coworker", "teacher",
          "friend", "boss", "cousin", "driver", "waiter"]
PLACES = ["the park", "the beach", "the office", "the gym", "school",
          "the mall", "the library", "the lake", "town", "the cafe"]
TIMES = ["today", "tonight", "this morning", "yesterday", "last night",
         "this weekend", "on monday", "after work"]

SLOTS = {
    "person": PEOPLE,
    "place": PLACES,
    "time": TIMES,
    "food": ["pizza", "pasta", "tacos", "soup", "cake", "coffee", "salad",
             "pancakes", "sushi", "curry"],
    "thing": ["movie", "book", "concert", "game", "trip", "garden", "photo",
              "recipe", "song", "project"],
    "good": ["good", "great", "lovely", "nice", "wonderful", "relaxing",
             "fun", "beautiful", "sunny", "pleasant"],
    "hate": ["hate", "despise", "loathe", "detest", "hate", "hate"],
    "group": ["people", "foreigners", "fans", "neighbors", "tourists",
              "women", "men", "kids", "those guys"],
    "insult": ["idiot", "moron", "loser", "clown", "fool", "jerk", "dumb",
               "stupid", "pathetic", "useless"],
    "body": ["body", "legs", "lips", "curves", "skin", "figure"],
    "hot": ["hot", "sexy", "steamy", "naughty", "seductive", "irresistible"],
}

TEMPLATES = {
    "neutral": [
        "I had a {good} day at {place}",
        "We went to {place} {time} and it was {good}",
        "Thanks for the {good} {thing}, see you soon",
        "Happy birthday to my favorite {person}",
        "Just finished a {good} {thing} {time}",
        "Does anyone want {food} {time}",
        "The weather at {place} is {good} {time}",
        "Congratulations on the new job, my {person} is proud of you",
        "I want to see the new {thing} {time}",
        "Cooked {food} for the family {time}, everyone loved it",
        "Had a {good} chat with my {person} at {place}",
        "Looking forward to the {thing} this weekend",
        "Great to see you at {place}",
        "Sharing a photo from our {good} {thing}",
        "Good luck with the exam {time}",
        "My {person} recommended this {thing}, really {good}",
        "Walking the dog around {place} {time}",
        "Thank you all for the kind wishes",
    ],
    "sexual": [
        "You look so {hot} in that dress",
        "Send me {hot} pics {time}",
        "Your {body} are so {hot}, call me",
        "I want to see you naked {time}",
        "Come over {time} and we can get {hot} in bed",
        "That {person} has a {hot} {body}",
        "Lets hook up at {place} {time}, just the two of us",
        "Wanna sleep with me {time}",
        "I keep thinking about your {hot} {body}",
        "Take it all off for me baby",
        "So {hot}, I want you in my bed",
        "Show me more of that {hot} {body}",
    ],
    "hatred": [
        "I {hate} this {person}",
        "I {hate} all these {group}",
        "{group} like you should disappear from {place}",
        "I {hate} you and everyone like you",
        "Nobody wants your kind at {place}",
        "I truly {hate} {group}, they ruin everything",
        "Get out of our country, we {hate} you",
        "I {hate} every {person} from that town",
        "Those {group} are disgusting and I {hate} them",
        "Pure hatred for this {person}",
        "I wish all {group} would vanish",
    ],
    "offensive": [
        "I want to see you without your respect",
        "You are a {insult}, shut up",
        "What a {insult}, no respect at all",
        "Shut up you {insult}",
        "You have zero respect, {insult}",
        "Nobody respects a {insult} like you",
        "Stop posting garbage you {insult}",
        "Your {thing} is trash and so are you",
        "Show some respect you {insult}",
        "Typical {insult} behavior, have some respect",
        "You disrespect everyone, total {insult}",
        "Go away {insult}, nobody asked",
    ],
    "pun_intended": [
        "I used to be a baker but I could not make enough dough, pun intended",
        "The {food} joke was cheesy, pun intended",
        "I am reading a book on anti gravity, impossible to put down",
        "My {person} is a great {thing} critic, no pun intended",
        "Time flies like an arrow, fruit flies like a banana",
        "That {thing} was egg cellent, pun totally intended",
        "I would tell a {food} joke but it might be too punny",
        "Never trust atoms, they make up everything",
        "The {person} who stole the calendar got twelve months",
        "I lost interest in being a banker, pun intended",
        "Whale hello there, this {thing} is fintastic",
        "Pun intended, that {food} was souper",
        "My {person} said this was a punny {thing}",
        "The math teacher has too many problems, pun intended",
    ],
}

# Cross-class words sprinkled onto some messages so that classes overlap.
NOISE = ["lol", "really", "today", "honestly", "omg", "seriously", "haha",
         "friend", "see", "want", "day", "people", "woman", "man", "love",
         "night", "bed", "joke", "show", "town", "stupid", "hot", "good"]

# Share of templated messages whose label is replaced by a different class,
# mimicking annotator disagreement.
LABEL_NOISE = 0.05


def fill(template, rng):
    out = template
    while "{" in out:
        start = out.index("{")
        end = out.index("}", start)
        key = out[start + 1:end]
        out = out[:start] + rng.choice(SLOTS[key]) + out[end + 1:]
    return out


def generate(rng):
    msgs = list(FIXED)
    for label, total in COUNTS.items():
        have = sum(1 for _, lab in FIXED if lab == label)
        seen = {text for text, _ in msgs}
        while have < total:
            text = fill(rng.choice(TEMPLATES[label]), rng)
            for _ in range(rng.choice([0, 0, 1, 1, 2])):
                text = text + " " + rng.choice(NOISE)
            if rng.random() < 0.2:
                text = text[0].upper() + text[1:] + rng.choice(["!", "!!", "?", "..."])
            if text in seen:
                continue
            seen.add(text)
            out_label = label
            if rng.random() < LABEL_NOISE:
                out_label = rng.choice([c for c in COUNTS if c != label])
            msgs.append((text, out_label))
            have += 1
    rng.shuffle(msgs)
    return msgs


def main():
    rng = random.Random(SEED)
    msgs = generate(rng)
    out = sys.stdout
    out.write('<?xml version="1.0" encoding="UTF-8"?>\n<corpus>\n')
    for i, (text, label) in enumerate(msgs, start=1):
        author = "u%03d" % rng.randint(1, 120)
        out.write('  <message id=%s author=%s class=%s>%s</message>\n'
                  % (quoteattr("c%04d" % i), quoteattr(author), quoteattr(label), escape(text)))
    out.write("</corpus>\n")


if __name__ == "__main__":
    main()
