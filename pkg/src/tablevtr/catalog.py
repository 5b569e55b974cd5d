"""Word catalogs shared by the synthetic corpus, the experts and the vocabulary."""

OBJECTS = (
    "bowl", "cup", "bottle", "ball", "guitar", "book",
    "knife", "phone", "umbrella", "bicycle", "laptop", "chair",
)
PERSONS = ("man", "woman", "boy", "girl")
SCENES = ("kitchen", "park", "street", "office", "beach", "stadium", "classroom", "garden")
MOTIONS = (
    "cooking", "running", "dancing", "singing", "jumping",
    "swimming", "reading", "talking", "walking", "cleaning",
)
AUDIO = ("music", "speech", "applause", "laughter", "traffic", "rain", "birds", "silence")

CATALOGS = {
    "object": OBJECTS,
    "person": PERSONS,
    "scene": SCENES,
    "motion": MOTIONS,
    "audio": AUDIO,
}

TEMPLATES = (
    "a {person} is {motion} in the {scene} with a {object}",
    "in the {scene} a {person} is {motion} near a {object} with {audio} sounds",
    "{person} {motion} with a {object} in a {scene}",
    "a {object} and a {person} {motion} in the {scene} while {audio} plays",
)

# Filler words used for distractor tags and vocabulary padding.
DISTRACTORS = (
    "red", "blue", "green", "yellow", "black", "white", "small", "large",
    "old", "new", "bright", "dark", "fast", "slow", "happy", "quiet",
    "loud", "wooden", "metal", "glass", "paper", "plastic", "soft", "hard",
    "window", "door", "table", "lamp", "tree", "car", "dog", "cat",
    "sky", "cloud", "river", "road", "hill", "wall", "floor", "screen",
    "camera", "light", "shadow", "water", "fire", "snow", "sun", "moon",
    "stone", "flower",
)
