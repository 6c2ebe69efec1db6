"""CQL-subset frontend: lexer, parser, AST, printer, checker."""
