"""Versioned prompt template resources.

Files are named ``<kind>_ja.<version>.txt``. The Japanese wording is this
project's own; swap the files (and bump the version) to run with different
prompts. English renderings for documentation:

``no_context_ja``
    Please answer the question briefly. / Question:{question} / ### Output:

``rag_ja``
    Please answer the given question. If the answer is included in the
    article text, use the answer from the text. If the article does not
    contain the answer, state that the article does not contain the answer
    and answer from your own knowledge. / Question:{question} /
    Article text: {context} / ### Output:
"""
