if __name__ == "__main__":
    import sys
    from . import WLLParser, UIHandler
    wllparser = WLLParser()
    ui = UIHandler(**wllparser.args_dict)
    sys.exit(ui.exit_status)
