"""Instruction templates for the three model calls used to mine concepts.

Each template ends with a block of ``<input>`` slots that :func:`render`
fills in order.  The demonstration blocks are part of the prompt text and
must stay verbatim so recorded fixtures keep matching.
"""

from __future__ import annotations

SLOT = "<input>"
IMAGE_MARKER = "(IMG)"
NO_IMAGE = "(not provided)"

_PREAMBLE = (
    "You are one of the best experts in Generative Models and Concept Learning in the world. "
    "You are very good at {skill} to research the representation in latent space from CLIP or "
    "Score-based Generative Models, which have wide applications in image editing. "
)

REWRITE_FOR_INSERTION = (
    _PREAMBLE.format(skill="designing concept dictionary")
    + "You are a great expert in understanding and parsing multimodal information from a given image. "
    "Now, given a source prompt, a target prompt, and a source image, your task is to rewrite the source "
    "prompt for the image editing task. Usually, there is a focused pair of concepts in the source prompt "
    'and the target prompt to be edited (e.g., "cat" to "dog"). The source concept is usually annotated in '
    'the brackets ("[]") in the source prompt. However, in some editing tasks, there is no clear source '
    "concept mentioned in the source prompt. Hence, for these tasks, you are required to comprehend the "
    "source image and identify the corresponding source concept. After comprehending the source image, you "
    "need to generate a re-written source prompt with a clearly annotated source concept.\n"
    "\n"
    "Here are two demonstrations:\n"
    "\n"
    "Source Prompt: a slanted mountain bicycle on the road in front of a building\n"
    "Target Prompt: a slanted [rusty] mountain bicycle on the road in front of a building\n"
    'Source Concept: ""\n'
    'Target Concept: "rusty"\n'
    "Source Image: (IMG)\n"
    "Re-written Source Prompt: a slanted [new] mountain bicycle on the road in front of a building\n"
    "\n"
    "Source Prompt: two birds sitting on a branch\n"
    "Target Prompt: two [origami] birds sitting on a branch\n"
    'Source Concept: ""\n'
    'Target Concept: "origami"\n'
    "Source Image: (IMG)\n"
    "Re-written Source Prompt: two [real] birds sitting on a branch\n"
    "\n"
    "The identified source concept should not be the same as the target concept. The response MUST be with "
    'brackets ("[]") around the source concept. You should not use "without" frequently. Try your best to '
    "comprehend the image.\n"
    'You should only output the re-written source prompt. DO NOT print anything else such as "Here are ...", '
    '"Sure, ...", "Certainly, ...".\n'
    "DO NOT print quotation marks unless necessary. Just return the string.\n"
    "\n"
    "Source Prompt: <input>\n"
    "Target Prompt: <input>\n"
    "Source Concept: <input>\n"
    "Target Concept: <input>\n"
    "Source Image: <input>\n"
    "Re-written Source Prompt:"
)

CONCEPT_LIST = (
    _PREAMBLE.format(skill="designing concept dictionary")
    + "You are a great expert in understanding and parsing multimodal information from a given image.\n"
    "Now, given a source prompt, a target prompt, and a source image, your task is to parse the given "
    "information into a concept list. The concept list consists of concepts, attributes, objects, and items "
    "that comprehensively describe the source image and cover the source prompt.\n"
    "Your concept list must have at least 15 concepts. As the concept list is for the task of image editing, "
    "there is a focused pair of concepts in the source prompt and the target prompt to be edited. The source "
    'concept is usually annotated in the bracket ("[]") in the source prompt. You must put the focused '
    "concept in the source prompt as the FIRST atom in the concept list. You must NOT put the focused concept "
    "in the target prompt in the concept list.\n"
    "\n"
    "Here are three demonstrations:\n"
    "\n"
    "Source Prompt: a [round] cake with orange frosting on a wooden plate\n"
    "Target Prompt: a [square] cake with orange frosting on a wooden plate\n"
    'Source Concept: "round"\n'
    'Target Concept: "square"\n'
    "Source Image: (IMG)\n"
    'Concept List: ["round", "cake", "orange", "frosting", "wooden", "plate", "swirl", "creamy", "crumbly", '
    '"smooth", "rustic", "natural", "muted", "handmade", "warm", "minimalist", "unfrosted", "botanical", '
    '"bark", "inviting", "cozy", "textured", "simple", "organic", "earthy", "soft", "classic", "contrasting", '
    '"neutral", "clean"]\n'
    "\n"
    "Source Prompt: a painting of [a dog in] the forest\n"
    "Target Prompt: a painting of the forest\n"
    'Source Concept: "a dog in"\n'
    'Target Concept: ""\n'
    "Source Image: (IMG)\n"
    'Concept List: ["a dog in", "painting", "forest", "trees", "leaves", "sunlight", "vibrant colors", '
    '"orange hues", "pink trees", "purple plants", "playful", "cartoonish", "nature", "animals", "butterflies", '
    '"fantasy", "surreal", "whimsical", "tall trees", "shadows", "depth", "light beams", "foliage", "dynamic", '
    '"warm tones", "imaginative", "dreamlike", "motion", "soft textures", "layered composition", '
    '"bright atmosphere"]\n'
    "\n"
    "Source Prompt: blue light, a black and white [cat] is playing with a flower\n"
    "Target Prompt: blue light, a black and white [dog] is playing with a flower\n"
    'Source Concept: "cat"\n'
    'Target Concept: "dog"\n'
    "Source Image: (IMG)\n"
    'Concept List: ["cat", "black", "white", "blue light", "flower", "playing", "paws", "stone path", '
    '"curious", "whiskers", "small", "fluffy", "outdoor", "pink petals", "focused", "nature", "detailed fur", '
    '"green stem", "bright", "youthful", "movement", "natural light", "close-up", "gentle", "exploration", '
    '"soft shadows", "grass between stones", "alert", "innocent", "delicate"]\n'
    "\n"
    "The concepts in the list should not be redundant or repetitive. Each concept in the list represents a "
    "unique perspective of objects, styles, and contexts. The response MUST be in Python list format.\n"
    "You should have at least 15 concepts in the list. You should only output the Python list.\n"
    'DO NOT print anything else such as "Here are ...", "Sure, ...", "Certainly, ...". '
    'Just return the list ["", "", ..., ..., ""].\n'
    "\n"
    "Source Prompt: <input>\n"
    "Target Prompt: <input>\n"
    "Source Concept: <input>\n"
    "Target Concept: <input>\n"
    "Source Image: <input>\n"
    "Concept List:"
)

STIMULI = (
    _PREAMBLE.format(skill="generating concept stimuli")
    + "You are a great expert in providing relevant information and scenarios based on a given concept.\n"
    "Now, given a concept, your task is to generate 30 (THIRTY) instances of concept stimuli for a given "
    "concept. As the concept stimuli will be used for the task of image editing, we need comprehensive, "
    "diverse, and accurate descriptions and examples for the concept.\n"
    "\n"
    "Here are three demonstrations of the concept and its corresponding concept stimuli:\n"
    "\n"
    "Concept: dog\n"
    "Concept Stimuli:\n"
    "[\n"
    '    "Dogs are known for their loyalty and strong bonds with humans.",\n'
    '    "A dog wags its tail excitedly when it sees its owner after a long day.",\n'
    '    "Puppies often chew on objects as a way to explore their environment.",\n'
    "    \"The sound of a dog’s bark can vary depending on its breed and mood.\",\n"
    '    "Dogs rely heavily on their sense of smell, which is far more sensitive than that of humans.",\n'
    '    "A dog runs alongside its owner during a morning jog, full of energy.",\n'
    "    ...\n"
    "]\n"
    "\n"
    "Concept: cat\n"
    "Concept Stimuli:\n"
    "[\n"
    '    "Cats are known for their graceful, stealthy movements.",\n'
    '    "A cat stretches lazily under the warm afternoon sun.",\n'
    '    "Kittens explore their surroundings with curiosity and playfulness.",\n'
    "    \"A cat’s purring has been shown to have a calming effect on humans.\",\n"
    '    "Stray cats often rely on their instincts and sharp senses for survival.",\n'
    '    "The eyes of a cat reflect light in the dark, giving them superior night vision.",\n'
    "    ...\n"
    "]\n"
    "\n"
    "Concept: cake\n"
    "Concept Stimuli:\n"
    "[\n"
    '    "Cakes are often baked in layers and filled with frosting or cream in between each layer.",\n'
    '    "A slice of cake reveals its moist interior, topped with a rich layer of chocolate ganache.",\n'
    '    "Cakes are a common centerpiece for celebrations such as birthdays, weddings, and anniversaries.",\n'
    '    "A cake adorned with fresh berries and whipped cream makes for a light, summery dessert.",\n'
    '    "Cupcakes are miniature cakes baked in individual paper liners and often topped with buttercream '
    'frosting.",\n'
    '    "The aroma of a freshly baked vanilla cake fills the kitchen with a warm, sweet scent.",\n'
    "    ...\n"
    "]\n"
    "\n"
    "The concept stimuli in the list should not be redundant or repetitive. Each stimulus in the list "
    "represents a unique perspective (e.g., styles, contexts, examples, attributes, descriptions, usages) of "
    "the concept. The response MUST be in Python list format.\n"
    "You should have at least 30 stimuli in the list. You should only output the Python list.\n"
    'DO NOT print anything else such as "Here are ...", "Sure, ...", "Certainly, ...". '
    'Just return the list ["", "", ..., ..., ""].\n'
    "\n"
    "Concept: <input>\n"
    "Concept Stimuli:"
)


def render(template: str, *values: str) -> str:
    """Fill the ``<input>`` slots of ``template`` left to right."""
    parts = template.split(SLOT)
    if len(parts) - 1 != len(values):
        raise ValueError(f"template has {len(parts) - 1} slots, got {len(values)} values")
    out = [parts[0]]
    for value, rest in zip(values, parts[1:]):
        out.append(value)
        out.append(rest)
    return "".join(out)


def quoted(concept: str) -> str:
    return '"' + concept + '"'


def repair_message(reason: str) -> str:
    return (
        f"Your previous answer was rejected: {reason}. "
        "Answer again, following every rule of the original instructions, and output only the answer."
    )


def top_up_message(have: int, need: int) -> str:
    return (
        f"Only {have} of your stimuli were unique. Give {need} more new stimuli for the same concept, "
        "different from all previous ones, as a Python list of strings and nothing else."
    )
