"""Protocol building blocks: sharing, crypto, messages, ledger, roles, verification."""
