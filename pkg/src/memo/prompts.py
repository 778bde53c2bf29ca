"""Prompt text: the base system prompt, per-game base contexts, optimizer templates."""

from __future__ import annotations

BASE_SYSTEM_PROMPT = (
    "You are a competitive game player. Make sure you read the game instructions "
    "carefully, and always follow the required format."
)

PROTECTED_OPEN = "=== ACTION FORMAT (keep unchanged) ==="
PROTECTED_CLOSE = "=== END ACTION FORMAT ==="

ACTION_FORMATS = {
    "kuhn_poker": (
        "- '[check]': Pass without betting (only if no bet is on the table)\n"
        "- '[bet]': Add 1 chip to the pot (only if no bet is on the table)\n"
        "- '[call]': Match an opponent's bet by adding 1 chip to the pot\n"
        "- '[fold]': Surrender your hand and let your opponent win the pot"
    ),
    "briscola": "Action: '[play X]' where X is the position (1-3) of the card in your hand",
    "simpletak": (
        "Choose one empty cell by its numbered index and place your stone there, "
        "e.g. '[12]' places your stone in cell 12."
    ),
    "simple_negotiation": (
        "- '[Offer: 3 Sheep, 2 Ore -> 5 Brick, 2 Sheep]': [Offer: Offered Resources -> Requested Resources]\n"
        "- '[Accept]': To accept an incoming offer.\n"
        "- '[Deny]': To deny an incoming offer (default)."
    ),
    "two_dollar": (
        "Always provide your reasoning/persuasion BEFORE the bracketed action.\n"
        "- Make a proposal: \"... [Propose] $X.XX\"\n"
        "- Accept current proposal: \"... [Accept]\"\n"
        "- Reject current proposal: \"... [Reject]\""
    ),
}

BASE_DIRECTIVES = (
    "Read the current game state carefully before choosing a move. Reason briefly "
    "about your options, then end your reply with exactly one action in the "
    "required format."
)


def protected_block(game_id: str) -> str:
    return f"{PROTECTED_OPEN}\n{ACTION_FORMATS[game_id]}\n{PROTECTED_CLOSE}"


def base_prompt(game_id: str) -> str:
    return f"{BASE_DIRECTIVES}\n\n{protected_block(game_id)}"


def split_prompt(prompt: str) -> tuple[str, str, str]:
    """(text before, protected block, text after); the block is '' if absent."""
    start = prompt.find(PROTECTED_OPEN)
    end = prompt.find(PROTECTED_CLOSE, start + 1) if start >= 0 else -1
    if start < 0 or end < 0:
        return prompt, "", ""
    end += len(PROTECTED_CLOSE)
    return prompt[:start], prompt[start:end], prompt[end:]


# Five categories of playstyle labels for random proposals.
STYLE_CATALOG = (
    # core play patterns
    "aggressive", "defensive", "analytical", "creative", "strategic", "adaptive", "balanced",
    # tactical approaches
    "opportunistic", "conservative", "risk-taking", "methodical", "intuitive", "predictive",
    "reactive", "proactive", "experimental", "systematic",
    # game-specific strategies
    "positional", "territorial", "sacrificial", "blocking-focused", "center-control",
    "edge-control", "fork-creating", "trap-setting", "opening-focused", "endgame-focused",
    # cognitive styles
    "minimax-oriented", "probabilistic", "rule-based", "principle-driven", "context-aware",
    "meta-gaming", "exploitative", "counter-play",
    # behavioral patterns
    "deceptive", "transparent", "unpredictable", "consistent", "alternating", "escalating",
    "de-escalating", "mirroring", "contrarian", "balancing",
)


def style_preface(style: str) -> str:
    return f"Playstyle: {style}. Let this style guide every decision you make."


RANDOM_PROPOSAL_TEMPLATE = """You are editing the instructions given to an agent that plays {title}.
Rewrite the instructions so that the agent plays in a {style} style.

EDITING RULES:
- Begin with a one-sentence preface that names the {style} playstyle.
- Make small edits only: substitute words, insert or delete clauses, or reorder sentences.
- Keep the text outside the action-format block under {budget} characters.
- Copy the block from "{open}" to "{close}" exactly, character for character.

Return only the rewritten instructions.

CURRENT INSTRUCTIONS:
{prompt}"""

MEMORY_PROPOSAL_TEMPLATE = """You are improving the instructions given to an agent that plays {title}.
Weave the lessons below into the instructions as concrete, actionable directives.

LESSONS FROM PAST GAMES:
{lessons}

EDITING RULES:
- Keep the text outside the action-format block under {budget} characters.
- Copy the block from "{open}" to "{close}" exactly, character for character.

Return only the revised instructions.

CURRENT INSTRUCTIONS:
{prompt}"""

REFLECTION_TEMPLATE = """You are analyzing strategically decisive states from this generation's games.
This state showed the highest variance in outcomes, making it a critical learning opportunity.

BOARD READING GUIDE:
- X and O marks are occupied positions (cannot be played)
- Numbers show empty positions available for play
- Always check position is empty before recommending

STRATEGIC STATE VIEW: {strategic_state}
STRATEGIC STATE OUTCOMES: {wins} wins, {losses} losses, {draws} draws

ANALYSIS REQUIREMENTS:
1. Strategic Analysis (2-3 sentences):
  - Identify what makes this state unique or decisive in gameplay
  - Explain why this configuration leads to varied outcomes
  - Highlight patterns, imbalances, opportunities, or vulnerabilities

2. Actionable Recommendations (2-3 sentences):
  - Provide SPECIFIC moves or positions (e.g., "cell 3", "position 5")
  - Address both offensive opportunities AND defensive necessities
  - Offer concrete strategies to improve outcomes and convert losses into wins or draws

Respond with clear, actionable analysis in plain text (no JSON)."""

MEMORY_OPERATION_TEMPLATE = """You are maintaining a state analysis library for strategic game pattern recognition. Update the library by performing operations on the state analyses.

NEW STATE ANALYSES FROM RECENT GAMES:
{new_abstracts_formatted}

EXISTING STATE ANALYSIS LIBRARY:
{old_abstracts_formatted}

OPERATION FORMAT:
Use simple XML tags for each operation:

<add>New state analysis with strategic pattern examples.</add>
<edit number="3">Updated state analysis with improved strategic insights.</edit>
<remove number="5">Why this state analysis should be removed</remove>

OPERATION GUIDELINES:
- ADD: For new state analyses covering unique board configurations or strategic scenarios
- EDIT: To merge similar states or enhance existing analyses with more specific advice
- REMOVE: For redundant states, duplicate board patterns, or analyses lacking actionable guidance

QUALITY REQUIREMENTS:
- Include SPECIFIC positions, cells, or moves (e.g., "cell 3", "position 5")
- Provide actionable advice addressing the state's win/loss variance
- Balance offensive opportunities with defensive necessities
- Help players convert losses into wins or draws
- Prioritize diverse board states over duplicate analyses

TECHNICAL REQUIREMENTS:
- Use the 'number' attribute for EDIT/REMOVE operations (1-based numbering)
- If library is empty, use ONLY ADD operations
- Never reference non-existent state analysis numbers

MERGE APPROACH:
1. Identify new analyses covering unique board states not in the library
2. Consolidate similar board positions through EDIT or REMOVE operations
3. Ensure the library represents diverse game phases (opening, midgame, endgame)"""

CONSOLIDATION_REQUEST = (
    "\n\nThe library now holds {size} analyses, above the limit of {cap}. "
    "Consolidate it: merge similar analyses with EDIT and drop redundant ones with "
    "REMOVE until at most {cap} remain. Do not ADD."
)
